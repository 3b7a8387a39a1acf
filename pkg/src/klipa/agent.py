"""ReAct-style agent: a bounded reason-act loop over retrieval and graph tools.

Each iteration renders a prompt (tool roster, recent history, scratchpad
of prior steps), asks the model for the next step, and either executes a
tool or accepts a final answer. The loop is bounded: after max_steps
without a final answer, or two consecutive unparseable replies, one
forced synthesis call produces the answer from the observations gathered
so far. Tool failures become ERROR observations the model can react to;
they never abort the run.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import (
    AgentError,
    GatewayError,
    InvalidConfig,
    KlipaError,
    SessionBusy,
)
from .gateway import ChatMessage, ChatRequest, Gateway
from .graphstore import GraphStore, NodeRef
from .retrieval import IndexSet, RetrievalConfig
from . import extraction

SNIPPET_LIMIT = 400
OBSERVATION_SNIPPET_LIMIT = 200
NO_EVIDENCE_MARKER = "NO EVIDENCE RETRIEVED"

TOOL_NAMES = (
    "chunk_retriever",
    "document_retriever",
    "graph_neighborhood",
    "graph_subgraph",
)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    input_schema: str


DEFAULT_TOOLS: tuple[ToolSpec, ...] = (
    ToolSpec(
        name="chunk_retriever",
        description="Search passage-level text for detailed facts.",
        input_schema="a search query string",
    ),
    ToolSpec(
        name="document_retriever",
        description="Search whole documents for broad or cross-document questions.",
        input_schema="a search query string",
    ),
    ToolSpec(
        name="graph_neighborhood",
        description="List an entity's direct relationships in the knowledge graph.",
        input_schema="an entity name",
    ),
    ToolSpec(
        name="graph_subgraph",
        description="Show all relationships among a set of entities.",
        input_schema="comma-separated entity names",
    ),
)


@dataclass(frozen=True)
class ToolCall:
    tool: str
    input: str


@dataclass(frozen=True)
class ReasoningStep:
    """One agent step: an action with its observation, or the final step
    (no action, no observation)."""

    thought: str
    action: ToolCall | None = None
    observation: str | None = None


@dataclass(frozen=True)
class Evidence:
    kind: str  # chunk | document | entity
    ref: str
    snippet: str


@dataclass(frozen=True)
class AgentAnswer:
    text: str
    steps: tuple[ReasoningStep, ...]
    evidence: tuple[Evidence, ...]
    degraded: bool


@dataclass(frozen=True)
class Turn:
    user_text: str
    answer: AgentAnswer


@dataclass
class ChatSession:
    """Append-only conversation history; one run at a time."""

    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created_at: float = field(default_factory=time.time)
    history: list[Turn] = field(default_factory=list)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )


@dataclass(frozen=True)
class AgentConfig:
    max_steps: int = 6
    history_window: int = 5
    history_char_budget: int = 4000

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise InvalidConfig("max_steps must be >= 1")
        if self.history_window < 0:
            raise InvalidConfig("history_window must be >= 0")


@dataclass(frozen=True)
class PromptSet:
    agent_template: str
    synthesize_template: str

    @classmethod
    def load(cls, prompts_dir: str | Path | None = None) -> "PromptSet":
        if prompts_dir is not None:
            base = Path(prompts_dir)
            return cls(
                agent_template=(base / "agent.txt").read_text(encoding="utf-8"),
                synthesize_template=(base / "synthesize.txt").read_text(
                    encoding="utf-8"
                ),
            )
        package_dir = resources.files("klipa").joinpath("prompts")
        return cls(
            agent_template=package_dir.joinpath("agent.txt").read_text(
                encoding="utf-8"
            ),
            synthesize_template=package_dir.joinpath("synthesize.txt").read_text(
                encoding="utf-8"
            ),
        )


@dataclass
class AgentContext:
    """Everything tools need: graph, indexes, gateway, configs, templates."""

    graph: GraphStore
    indexes: IndexSet
    gateway: Gateway
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    prompts: PromptSet = field(default_factory=PromptSet.load)


# --- prompt rendering ---------------------------------------------------------


def _render_tools(tools: tuple[ToolSpec, ...]) -> str:
    return "\n".join(
        f"- {t.name}: {t.description} (input: {t.input_schema})" for t in tools
    )


def _render_history(history: list[Turn], cfg: AgentConfig) -> str:
    recent = list(history[-cfg.history_window :]) if cfg.history_window else []
    while recent:
        rendered = "\n".join(
            f"User: {turn.user_text}\nAssistant: {turn.answer.text}"
            for turn in recent
        )
        if len(rendered) <= cfg.history_char_budget or len(recent) == 1:
            return rendered
        recent = recent[1:]  # drop the oldest turn first
    return "(no prior turns)"


def _render_scratchpad(steps: list[ReasoningStep], notes: list[str]) -> str:
    blocks: list[str] = []
    for step in steps:
        if step.action is None:
            continue
        blocks.append(
            f"Thought: {step.thought}\n"
            f"Action: {step.action.tool}\n"
            f"Action Input: {step.action.input}\n"
            f"Observation: {step.observation}"
        )
    blocks.extend(notes)
    return "\n".join(blocks)


def render_agent_prompt(
    query: str,
    history: list[Turn],
    steps: list[ReasoningStep],
    tools: tuple[ToolSpec, ...],
    cfg: AgentConfig,
    prompts: PromptSet,
    notes: list[str] | None = None,
) -> str:
    """Deterministic agent prompt for one loop iteration."""
    return prompts.agent_template.format(
        tools=_render_tools(tools),
        history=_render_history(history, cfg),
        query=query,
        scratchpad=_render_scratchpad(steps, notes or []),
    )


# --- step parsing -------------------------------------------------------------


@dataclass(frozen=True)
class StepIntent:
    """Parsed model reply: an action, a final answer, or malformed (data,
    not an error; the loop decides what to do with it)."""

    kind: str  # action | final | malformed
    thought: str = ""
    tool: str = ""
    tool_input: str = ""
    final_text: str = ""
    raw: str = ""


_MARKERS = ("Action:", "Action Input:", "Final Answer:", "Observation:", "Thought:")


def _text_after(label: str, text: str) -> tuple[int, str] | None:
    """Position of the first occurrence of label and the text that follows
    it up to the next marker."""
    pos = text.find(label)
    if pos < 0:
        return None
    start = pos + len(label)
    end = len(text)
    for marker in _MARKERS:
        nxt = text.find(marker, start)
        if nxt >= 0:
            end = min(end, nxt)
    return pos, text[start:end].strip()


def parse_step(text: str) -> StepIntent:
    """Tolerant parse of a model reply into a step intent.

    A Final Answer wins unless an Action block appears before it; an
    Action needs both Action: and Action Input:. Anything else is a
    malformed intent carrying the raw text.
    """
    final = _text_after("Final Answer:", text)
    action = _text_after("Action:", text)
    thought_part = _text_after("Thought:", text)
    thought = thought_part[1] if thought_part else ""

    if final is not None and (action is None or final[0] < action[0]):
        return StepIntent(kind="final", thought=thought, final_text=final[1], raw=text)
    if action is not None:
        action_input = _text_after("Action Input:", text)
        tool = action[1].splitlines()[0].strip() if action[1] else ""
        if tool and action_input is not None:
            return StepIntent(
                kind="action",
                thought=thought,
                tool=tool,
                tool_input=action_input[1],
                raw=text,
            )
    return StepIntent(kind="malformed", thought=thought, raw=text)


# --- tool execution -----------------------------------------------------------


@dataclass
class ToolResult:
    observation: str
    evidence: list[Evidence] = field(default_factory=list)


def _flat(text: str, limit: int) -> str:
    return " ".join(text.split())[:limit]


def _retrieval_result(context: AgentContext, level: str, query: str) -> ToolResult:
    hits = context.indexes.retrieve(level, query, context.gateway, context.retrieval)
    if not hits:
        return ToolResult(observation="No results.")
    index = context.indexes.index_for(level)
    lines: list[str] = []
    evidence: list[Evidence] = []
    for i, hit in enumerate(hits, 1):
        item = index.get(hit.id)
        text = item.text if item is not None else ""
        lines.append(
            f"{i}. [{hit.id}] (score {hit.score:.3f}) "
            f"{_flat(text, OBSERVATION_SNIPPET_LIMIT)}"
        )
        evidence.append(
            Evidence(kind=level, ref=hit.id, snippet=_flat(text, SNIPPET_LIMIT))
        )
    return ToolResult(observation="\n".join(lines), evidence=evidence)


def _entity_evidence(context: AgentContext, ref: NodeRef) -> Evidence:
    node = context.graph.get_node(ref)
    return Evidence(
        kind="entity",
        ref=f"{ref.type}:{ref.key}",
        snippet=_flat(node.display_name, SNIPPET_LIMIT),
    )


def _neighborhood_result(context: AgentContext, raw_input: str) -> ToolResult:
    key = extraction.canonical_key(raw_input)
    refs = context.graph.resolve_key(key)
    if not refs:
        return ToolResult(observation=f"ERROR: unknown entity '{raw_input.strip()}'")
    lines: list[str] = []
    evidence: list[Evidence] = []
    seen: set[NodeRef] = set()
    for ref in refs:
        node = context.graph.get_node(ref)
        lines.append(f"{node.display_name} ({ref.type}):")
        if ref not in seen:
            seen.add(ref)
            evidence.append(_entity_evidence(context, ref))
        edges = context.graph.edges_of(ref, direction="both")
        if not edges:
            lines.append("  (no relationships)")
        for edge in edges:
            if edge.src == ref:
                other = edge.dst
                arrow = f"  -{edge.rel_type}-> "
            else:
                other = edge.src
                arrow = f"  <-{edge.rel_type}- "
            other_node = context.graph.get_node(other)
            lines.append(f"{arrow}{other_node.display_name} ({other.type})")
            if other not in seen:
                seen.add(other)
                evidence.append(_entity_evidence(context, other))
    return ToolResult(observation="\n".join(lines), evidence=evidence)


def _subgraph_result(context: AgentContext, raw_input: str) -> ToolResult:
    names = [part.strip() for part in raw_input.split(",") if part.strip()]
    if not names:
        return ToolResult(observation="ERROR: no entity names given")
    refs: set[NodeRef] = set()
    unknown: list[str] = []
    for name in names:
        matches = context.graph.resolve_key(extraction.canonical_key(name))
        if matches:
            refs.update(matches)
        else:
            unknown.append(name)
    if not refs:
        return ToolResult(
            observation="ERROR: none of the entities are known: "
            + ", ".join(unknown)
        )
    snapshot = context.graph.induced_subgraph(refs)
    display = {node.ref(): node.display_name for node in snapshot.nodes}
    lines = [
        "Entities: "
        + ", ".join(f"{node.display_name} ({node.type})" for node in snapshot.nodes)
    ]
    if unknown:
        lines.append("Unknown: " + ", ".join(unknown))
    if snapshot.edges:
        for edge in snapshot.edges:
            lines.append(
                f"{display[edge.src]} ({edge.src.type}) -{edge.rel_type}-> "
                f"{display[edge.dst]} ({edge.dst.type})"
            )
    else:
        lines.append("No relationships among these entities.")
    evidence = [
        _entity_evidence(context, node.ref()) for node in snapshot.nodes
    ]
    return ToolResult(observation="\n".join(lines), evidence=evidence)


def execute_tool(action: ToolCall, context: AgentContext) -> ToolResult:
    """Dispatch one tool call; every failure becomes an ERROR observation."""
    try:
        if action.tool == "chunk_retriever":
            return _retrieval_result(context, "chunk", action.input)
        if action.tool == "document_retriever":
            return _retrieval_result(context, "document", action.input)
        if action.tool == "graph_neighborhood":
            return _neighborhood_result(context, action.input)
        if action.tool == "graph_subgraph":
            return _subgraph_result(context, action.input)
        return ToolResult(
            observation=f"ERROR: unknown tool '{action.tool}'; available: "
            + ", ".join(TOOL_NAMES)
        )
    except KlipaError as exc:
        return ToolResult(observation=f"ERROR: {exc}")


# --- synthesis and the run loop -------------------------------------------------


def synthesize(
    steps: list[ReasoningStep], query: str, gateway: Gateway, prompts: PromptSet
) -> str:
    """One chat call that turns gathered observations into an answer.

    With zero observations the prompt carries the NO EVIDENCE RETRIEVED
    marker so the model declines honestly instead of inventing sources.
    """
    observations = [s.observation for s in steps if s.observation]
    block = (
        "\n".join(f"{i}. {obs}" for i, obs in enumerate(observations, 1))
        if observations
        else NO_EVIDENCE_MARKER
    )
    prompt = prompts.synthesize_template.format(query=query, observations=block)
    reply = gateway.chat(
        ChatRequest(messages=(ChatMessage(role="user", content=prompt),))
    )
    return reply.text.strip()


_MALFORMED_NOTE = (
    "(Your previous reply did not match the required format. Reply with a "
    "Thought and either an Action block or a Final Answer.)"
)


def run(
    query: str,
    session: ChatSession,
    context: AgentContext,
    tools: tuple[ToolSpec, ...] = DEFAULT_TOOLS,
) -> AgentAnswer:
    """Run the agent loop for one user query within a session.

    Terminates within max_steps + 1 chat calls. The answer (with its step
    trace, deduplicated evidence, and degraded flag) is appended to the
    session history; on hard gateway failure the session is unmodified
    and AgentError carries the partial steps.
    """
    if not session._lock.acquire(blocking=False):
        raise SessionBusy(f"session {session.id} already has a run in flight")
    try:
        cfg = context.agent
        steps: list[ReasoningStep] = []
        notes: list[str] = []
        evidence: list[Evidence] = []
        evidence_seen: set[tuple[str, str]] = set()
        consecutive_malformed = 0
        final_text: str | None = None
        final_thought = ""

        def add_evidence(items: list[Evidence]) -> None:
            for item in items:
                key = (item.kind, item.ref)
                if key not in evidence_seen:
                    evidence_seen.add(key)
                    evidence.append(item)

        try:
            for _ in range(cfg.max_steps):
                prompt = render_agent_prompt(
                    query, session.history, steps, tools, cfg, context.prompts, notes
                )
                reply = context.gateway.chat(
                    ChatRequest(messages=(ChatMessage(role="user", content=prompt),))
                )
                intent = parse_step(reply.text)
                if intent.kind == "final":
                    final_text = intent.final_text
                    final_thought = intent.thought
                    break
                if intent.kind == "action":
                    consecutive_malformed = 0
                    result = execute_tool(
                        ToolCall(tool=intent.tool, input=intent.tool_input), context
                    )
                    steps.append(
                        ReasoningStep(
                            thought=intent.thought,
                            action=ToolCall(tool=intent.tool, input=intent.tool_input),
                            observation=result.observation,
                        )
                    )
                    add_evidence(result.evidence)
                    continue
                consecutive_malformed += 1
                notes.append(_MALFORMED_NOTE)
                if consecutive_malformed >= 2:
                    break
            if final_text is None:
                final_text = synthesize(steps, query, context.gateway, context.prompts)
                final_thought = "Step budget reached; synthesizing from observations."
        except GatewayError as exc:
            raise AgentError(f"gateway failure mid-run: {exc}", steps=steps) from exc

        steps.append(ReasoningStep(thought=final_thought, action=None, observation=None))
        answer = AgentAnswer(
            text=final_text,
            steps=tuple(steps),
            evidence=tuple(evidence),
            degraded=len(evidence) == 0,
        )
        session.history.append(Turn(user_text=query, answer=answer))
        return answer
    finally:
        session._lock.release()


# --- serialization --------------------------------------------------------------


def answer_to_dict(answer: AgentAnswer) -> dict:
    return {
        "text": answer.text,
        "steps": [
            {
                "thought": step.thought,
                "action": (
                    {"tool": step.action.tool, "input": step.action.input}
                    if step.action
                    else None
                ),
                "observation": step.observation,
            }
            for step in answer.steps
        ],
        "evidence": [
            {"kind": e.kind, "ref": e.ref, "snippet": e.snippet}
            for e in answer.evidence
        ],
        "degraded": answer.degraded,
    }


def answer_from_dict(data: dict) -> AgentAnswer:
    steps = tuple(
        ReasoningStep(
            thought=s.get("thought", ""),
            action=(
                ToolCall(tool=s["action"]["tool"], input=s["action"]["input"])
                if s.get("action")
                else None
            ),
            observation=s.get("observation"),
        )
        for s in data.get("steps", [])
    )
    evidence = tuple(
        Evidence(kind=e["kind"], ref=e["ref"], snippet=e.get("snippet", ""))
        for e in data.get("evidence", [])
    )
    return AgentAnswer(
        text=data["text"],
        steps=steps,
        evidence=evidence,
        degraded=bool(data.get("degraded", False)),
    )
