import pytest

from ragforge.agent import (
    EXEC_NODES,
    NODE_NAMES,
    AgentLimits,
    AgentOptions,
    AgenticRag,
    AgentTurnError,
    GraphState,
    TraceEvent,
)
from ragforge.backend import MockBackend, RetryPolicy, ScriptRule, default_script
from ragforge.funcall import (
    DEFAULT_DETAIL_TEMPLATES,
    MEDIUM,
    NO_CONTEXT_MARKER,
    PersonaConfig,
)
from ragforge.retrieval import ScoredDoc


def make_docs(*texts):
    return [
        ScoredDoc(chunk_id=f"c{i}", text=text, score=1.0, rank=i + 1)
        for i, text in enumerate(texts)
    ]


class RecordingRetriever:
    def __init__(self, docs):
        self.docs = docs
        self.questions = []

    def __call__(self, question):
        self.questions.append(question)
        return list(self.docs)


def judge_rule(key, value, times=None):
    verdict = "true" if value else "false"
    return ScriptRule(contains=f'"{key}"', response=f'{{"{key}": {verdict}}}', times=times)


def hostile_script(relevant=True, grounded=True, addresses=True):
    return [
        judge_rule("relevant", relevant),
        judge_rule("grounded", grounded),
        judge_rule("addresses", addresses),
        ScriptRule(contains="Return only the rewritten question.", response="rewritten form"),
        ScriptRule(contains=None, response="an answer"),
    ]


def make_agent(backend=None, docs=None, **options):
    retriever = RecordingRetriever(docs if docs is not None else make_docs("brake context"))
    agent = AgenticRag(
        retriever,
        backend if backend is not None else MockBackend(),
        options=AgentOptions(**options) if options else None,
    )
    return agent, retriever


def events(trace):
    return [(e.node, e.outcome) for e in trace]


# -- golden happy path -------------------------------------------------------


def test_happy_path_golden_trace():
    agent, _ = make_agent()
    answer, trace, state = agent.run_turn("what is the caliper torque?")
    assert answer == "Mock answer: what is the caliper torque?"
    assert events(trace) == [
        ("retrieve", "1 documents"),
        ("grade_documents", "kept 1/1"),
        ("route", "generate"),
        ("generate", "ok degraded=false"),
        ("route", "end"),
    ]
    assert state.degraded is False
    assert state.chat_history == [(state.original_question, answer)]


def test_happy_path_is_deterministic_modulo_timestamps():
    def run():
        agent, _ = make_agent(backend=MockBackend())
        _, trace, _ = agent.run_turn("same question")
        return [(e.node, e.summary, e.outcome) for e in trace]

    assert run() == run()


def test_trace_events_use_known_node_names():
    agent, _ = make_agent()
    _, trace, _ = agent.run_turn("q")
    assert all(e.node in NODE_NAMES for e in trace)
    assert trace[-1].node == "route"
    assert trace[-1].outcome == "end"


# -- rewrite exhaustion path ---------------------------------------------------


def test_irrelevant_documents_exhaust_rewrites_then_degrade():
    backend = MockBackend(hostile_script(relevant=False))
    agent, retriever = make_agent(backend=backend)
    answer, trace, state = agent.run_turn("original question")

    transforms = [e for e in trace if e.node == "transform_query"]
    assert len(transforms) == 3
    assert state.degraded is True
    assert answer == "an answer"
    # Retrieval ran once per rewrite round plus the initial round.
    assert len(retriever.questions) == 4
    assert retriever.questions == ["original question"] + ["rewritten form"] * 3
    # The degraded generate is never quality-judged; the turn short-circuits.
    assert trace[-1].node == "route"
    assert trace[-1].summary == "degraded short-circuit"
    assert trace[-1].outcome == "end"
    assert not any('"grounded"' in call for call in backend.calls)


def test_degraded_generate_sees_no_context_marker():
    backend = MockBackend(hostile_script(relevant=False))
    agent, _ = make_agent(backend=backend)
    _, trace, _ = agent.run_turn("q")
    generate_events = [e for e in trace if e.node == "generate"]
    assert len(generate_events) == 1
    assert NO_CONTEXT_MARKER in generate_events[0].summary
    assert generate_events[0].outcome == "ok degraded=true"


# -- regeneration path ----------------------------------------------------------


def test_ungrounded_once_triggers_one_regeneration():
    rules = [
        judge_rule("relevant", True),
        judge_rule("grounded", False, times=1),
        judge_rule("grounded", True),
        judge_rule("addresses", True),
        ScriptRule(contains=None, response="an answer"),
    ]
    agent, _ = make_agent(backend=MockBackend(rules))
    answer, trace, state = agent.run_turn("q")
    assert answer == "an answer"
    assert state.degraded is False
    assert events(trace) == [
        ("retrieve", "1 documents"),
        ("grade_documents", "kept 1/1"),
        ("route", "generate"),
        ("generate", "ok degraded=false"),
        ("route", "generate"),
        ("generate", "ok degraded=false"),
        ("route", "end"),
    ]
    assert "regen 1/2" in trace[4].summary


def test_regeneration_escalates_detail_level():
    rules = [
        judge_rule("relevant", True),
        judge_rule("grounded", False, times=1),
        judge_rule("grounded", True),
        judge_rule("addresses", True),
        ScriptRule(contains=None, response="an answer"),
    ]
    agent, _ = make_agent(backend=MockBackend(rules))
    _, trace, _ = agent.run_turn("q")
    generate_events = [e for e in trace if e.node == "generate"]
    assert DEFAULT_DETAIL_TEMPLATES[MEDIUM] not in generate_events[0].summary
    assert DEFAULT_DETAIL_TEMPLATES[MEDIUM] in generate_events[1].summary


def test_never_grounded_exhausts_regens_then_degrades():
    backend = MockBackend(hostile_script(grounded=False))
    agent, _ = make_agent(backend=backend)
    answer, trace, state = agent.run_turn("q")
    assert state.degraded is True
    assert answer == "an answer"
    generate_events = [e for e in trace if e.node == "generate"]
    assert len(generate_events) == 3  # initial + 2 regens
    assert "regen budget exhausted" in trace[-1].summary


# -- off-question path ------------------------------------------------------------


def test_grounded_but_off_question_rewrites():
    rules = [
        judge_rule("relevant", True),
        judge_rule("grounded", True),
        judge_rule("addresses", False, times=1),
        judge_rule("addresses", True),
        ScriptRule(contains="Return only the rewritten question.", response="sharper question"),
        ScriptRule(contains=None, response="an answer"),
    ]
    agent, retriever = make_agent(backend=MockBackend(rules))
    answer, trace, state = agent.run_turn("vague question")
    assert answer == "an answer"
    assert state.degraded is False
    assert retriever.questions == ["vague question", "sharper question"]
    route_summaries = [e.summary for e in trace if e.node == "route"]
    assert any("grounded=true addresses=false" in s for s in route_summaries)


def test_never_addresses_exhausts_rewrites_then_degrades():
    backend = MockBackend(hostile_script(addresses=False))
    agent, _ = make_agent(backend=backend)
    _, trace, state = agent.run_turn("q")
    assert state.degraded is True
    transforms = [e for e in trace if e.node == "transform_query"]
    assert len(transforms) == 3
    assert "rewrite budget exhausted" in trace[-1].summary


# -- bounded execution --------------------------------------------------------------


def test_node_execution_bound_formula():
    assert AgentLimits(3, 2).node_execution_bound() == 21
    assert AgentLimits(0, 0).node_execution_bound() == 4
    with pytest.raises(ValueError):
        AgentLimits(max_rewrites=-1)


@pytest.mark.parametrize(
    "relevant, grounded, addresses",
    [
        (True, True, True),
        (False, True, True),
        (True, False, True),
        (True, True, False),
        (True, False, False),
        (False, False, False),
    ],
)
def test_adversarial_judges_stay_within_bound(relevant, grounded, addresses):
    backend = MockBackend(hostile_script(relevant, grounded, addresses))
    agent, _ = make_agent(backend=backend)
    answer, trace, _ = agent.run_turn("q")
    assert answer  # always terminates with a non-empty answer
    executed = sum(1 for e in trace if e.node in EXEC_NODES)
    assert executed <= AgentLimits().node_execution_bound()


def test_worst_observed_adversary_uses_seventeen_executions():
    # Off-question verdicts burn the rewrite budget with a full
    # retrieve/grade/generate round per rewrite; failing groundedness at the
    # end burns the regen budget too. This is the deepest path the routing
    # table allows, comfortably under the bound of 21:
    # 4 retrieves + 4 grades + 6 generates + 3 transforms = 17.
    rules = [
        judge_rule("relevant", True),
        ScriptRule(contains='"grounded"', response='{"grounded": true}', times=3),
        ScriptRule(contains='"grounded"', response='{"grounded": false}'),
        judge_rule("addresses", False),
        ScriptRule(contains="Return only the rewritten question.", response="again"),
        ScriptRule(contains=None, response="an answer"),
    ]
    backend = MockBackend(rules)
    agent, _ = make_agent(backend=backend)
    answer, trace, state = agent.run_turn("q")
    assert answer == "an answer"
    assert state.degraded is True
    executed = sum(1 for e in trace if e.node in EXEC_NODES)
    assert executed == 17
    assert executed <= AgentLimits().node_execution_bound()


# -- failure handling ------------------------------------------------------------


def test_malformed_judge_output_counts_as_false_with_warning():
    rules = [
        ScriptRule(contains='"relevant"', response="not json"),
        judge_rule("grounded", True),
        judge_rule("addresses", True),
        ScriptRule(contains="Return only the rewritten question.", response="better q"),
        ScriptRule(contains=None, response="an answer"),
    ]
    agent, _ = make_agent(backend=MockBackend(rules))
    _, trace, state = agent.run_turn("q")
    grade_events = [e for e in trace if e.node == "grade_documents"]
    assert "relevant judge failed" in grade_events[0].summary
    assert grade_events[0].outcome == "kept 0/1"
    assert state.degraded is True  # every grade failed, budget exhausted


def test_rewrite_failure_keeps_question_and_spends_budget():
    rules = [
        judge_rule("relevant", False),
        ScriptRule(
            contains="Return only the rewritten question.",
            response="never delivered",
            fail_times=99,
        ),
        ScriptRule(contains=None, response="an answer"),
    ]
    backend = MockBackend(rules, retry=RetryPolicy(max_attempts=2, backoff_seconds=0.0))
    agent, retriever = make_agent(backend=backend)
    answer, trace, state = agent.run_turn("stubborn question")
    assert answer == "an answer"
    transforms = [e for e in trace if e.node == "transform_query"]
    assert len(transforms) == 3
    assert all(e.outcome == "kept" for e in transforms)
    # Question never changed across retrieval rounds.
    assert retriever.questions == ["stubborn question"] * 4


def test_generation_failure_raises_with_partial_trace():
    rules = [
        judge_rule("relevant", True),
        ScriptRule(contains=None, response="never", fail_times=99),
    ]
    backend = MockBackend(rules, retry=RetryPolicy(max_attempts=2, backoff_seconds=0.0))
    agent, _ = make_agent(backend=backend)
    with pytest.raises(AgentTurnError) as excinfo:
        agent.run_turn("q")
    trace = excinfo.value.trace
    assert [e.node for e in trace] == ["retrieve", "grade_documents", "route", "generate"]
    assert trace[-1].outcome.startswith("failed:")


def test_empty_generation_counts_as_failure():
    rules = [
        judge_rule("relevant", True),
        ScriptRule(contains=None, response="   "),
    ]
    agent, _ = make_agent(backend=MockBackend(rules))
    with pytest.raises(AgentTurnError):
        agent.run_turn("q")


def test_empty_question_rejected():
    agent, _ = make_agent()
    with pytest.raises(ValueError):
        agent.run_turn("")


# -- history ----------------------------------------------------------------------


def test_second_turn_prompt_contains_first_turn_history():
    agent, _ = make_agent()
    answer1, _, state1 = agent.run_turn("first question")
    _, trace2, state2 = agent.run_turn("second question", state1.chat_history)
    generate_events = [e for e in trace2 if e.node == "generate"]
    assert "User: first question" in generate_events[0].summary
    assert f"Assistant: {answer1}" in generate_events[0].summary
    assert state2.chat_history[-1][0] == "second question"
    assert len(state2.chat_history) == 2


def test_rewrite_prompt_contains_history_block():
    rules = [
        judge_rule("relevant", False, times=1),
        judge_rule("relevant", True),
        ScriptRule(contains="Return only the rewritten question.", response="new q"),
        ScriptRule(contains=None, response="an answer"),
    ]
    backend = MockBackend(rules)
    agent, _ = make_agent(backend=backend)
    agent.run_turn("follow-up", [("earlier q", "earlier a")])
    rewrite_calls = [c for c in backend.calls if "Return only the rewritten question." in c]
    assert len(rewrite_calls) == 1
    assert "Conversation so far:" in rewrite_calls[0]
    assert "User: earlier q" in rewrite_calls[0]


# -- function-calling integration ----------------------------------------------------


def test_funcall_mode_preserves_answer_and_trace_shape():
    plain_agent, _ = make_agent(backend=MockBackend())
    plain_answer, plain_trace, _ = plain_agent.run_turn("what psi?")

    fc_agent, _ = make_agent(backend=MockBackend(), use_funcall=True)
    fc_answer, fc_trace, _ = fc_agent.run_turn("what psi?")

    assert fc_answer == plain_answer
    assert events(fc_trace) == events(plain_trace)


def test_options_persona_threads_into_prompt():
    agent, _ = make_agent(persona=PersonaConfig(persona="a gruff mechanic", language="en"))
    _, trace, _ = agent.run_turn("q")
    generate_events = [e for e in trace if e.node == "generate"]
    assert "You are a gruff mechanic." in generate_events[0].summary


# -- data types -------------------------------------------------------------------


def test_trace_event_validation_and_dict():
    with pytest.raises(ValueError):
        TraceEvent(node="bogus", summary="s", outcome="o")
    event = TraceEvent(node="retrieve", summary="s", outcome="o")
    as_dict = event.to_dict()
    assert set(as_dict) == {"node", "summary", "outcome", "ts"}


def test_graph_state_add_event_appends():
    state = GraphState(original_question="q", question="q")
    state.add_event("retrieve", "s", "o")
    assert len(state.trace) == 1
    assert state.trace[0].node == "retrieve"
