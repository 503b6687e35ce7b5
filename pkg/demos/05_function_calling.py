"""
Retry-adaptive function calling
===============================

Each failed round bumps a retry counter that selects a more explicit
detail template: brief, then medium, then detailed. The tool-call
envelope carries everything the next round needs in its query field, so
escalation needs no external state; feed the envelope's query back in
and only the detail section changes.
"""

from ragforge.funcall import (
    PersonaConfig,
    build_query_input,
    invoke,
    prompt_by_retry,
)

persona = PersonaConfig(persona="a master mechanic", language="en", retry=0)
history = [("Is the car safe to drive?", "Check the brake pads first.")]

print("retry -> detail level:")
for retry in range(4):
    print(f"  {retry} -> {prompt_by_retry(retry)}")

# Round 0: pack the question, call the model (stubbed here), wrap the
# draft in an envelope.
packed = build_query_input(persona, history, "What pad thickness is the limit?")
envelope = invoke({"output": "3 mm.", "query_input": packed}, persona)
print(f"\nround 0 envelope tool: {envelope.tool}")
print(envelope.to_json()[:120] + "...")

# Rounds 1 and 2: re-invoke with the previous envelope's query at the
# bumped retry level. Diff the packed queries to see what changed.
previous = envelope
for retry in (1, 2):
    persona = persona.with_retry(retry)
    envelope = invoke(
        {"output": f"attempt {retry}", "query_input": previous.tool_input["query"]},
        persona,
    )
    old_blocks = previous.tool_input["query"].split("\n\n")
    new_blocks = envelope.tool_input["query"].split("\n\n")
    changed = [
        block.splitlines()[0]
        for block, other in zip(new_blocks, old_blocks)
        if block != other
    ]
    print(f"\nround {retry}: sections changed (vs previous round): {changed}")
    print(f"  detail now: {new_blocks[0].splitlines()[1][:60]}...")
    previous = envelope
