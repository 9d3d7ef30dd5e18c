"""Answering over the timeline memory: when something happened, what has
happened so far, and what context a planning query should carry.

Pure functions over a MemoryLog plus an embed adapter; no I/O here.
"""
from __future__ import annotations

from dataclasses import dataclass

from .config import GroundingConfig
from .errors import EmptyText, EmptyWindow
from .memory import MemoryEntry, MemoryLog
from .text import content_stems, normalize, split_clauses
from .timeline import MediaTime, format_timestamp

NO_MATCH_TEXT = "I don't recall seeing that."


@dataclass(frozen=True)
class GroundingHit:
    entry: MemoryEntry
    score: float

    @property
    def timestamp(self) -> str:
        return format_timestamp(self.entry.midpoint)

    def to_payload(self) -> dict:
        return {
            "t_start": self.entry.t_start,
            "t_end": self.entry.t_end,
            "description": self.entry.description,
            "score": self.score,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class GroundingResult:
    text: str
    hits: tuple[GroundingHit, ...] = ()

    @property
    def matched(self) -> bool:
        return bool(self.hits)

    def to_payload(self) -> dict:
        return {"text": self.text, "hits": [h.to_payload() for h in self.hits]}


def ground_clause(
    log: MemoryLog, embed_adapter, clause: str, tau: float, max_hits: int
) -> list[GroundingHit]:
    """Entries matching one clause, best first. Empty when nothing clears tau."""
    try:
        query_vec = embed_adapter.embed(clause)
    except EmptyText:
        return []
    scored = log.query_by_text(query_vec, tau=tau, top_n=max_hits)
    return [GroundingHit(entry=e, score=s) for e, s in scored]


def answer_grounding(
    log: MemoryLog, embed_adapter, query: str, config: GroundingConfig | None = None
) -> GroundingResult:
    """Resolve a when-did-this-happen query against the memory log.

    The query is split on clause boundaries so one utterance can ask about
    several actions; each clause is answered with its best entry as
    "<description> at <timestamp>". Clauses with no match fall back to a
    fixed no-recall sentence, as does the whole query.
    """
    config = config or GroundingConfig()
    parts = []
    all_hits: list[GroundingHit] = []
    for clause in split_clauses(query):
        if not content_stems(clause):
            continue  # connective flotsam like "and then"
        hits = ground_clause(log, embed_adapter, clause, config.tau, config.max_hits)
        if hits:
            best = hits[0]
            parts.append(f"{best.entry.description} at {best.timestamp}")
            all_hits.append(best)
        else:
            parts.append(NO_MATCH_TEXT)
    if not parts:
        return GroundingResult(text=NO_MATCH_TEXT)
    if not all_hits:
        # every clause missed: one apology, not one per clause
        return GroundingResult(text=NO_MATCH_TEXT)
    return GroundingResult(text="; ".join(parts), hits=tuple(all_hits))


# --- planning context ------------------------------------------------------------

def plan_context(
    history: list[MemoryEntry],
    current_caption: str,
    question: str,
    budget_chars: int = 4000,
) -> str:
    """Assemble the HISTORY / CURRENT / QUESTION document handed to chat.

    History lines are time-ordered; when the document exceeds the budget
    the oldest history lines are dropped first. CURRENT and QUESTION are
    never truncated.
    """
    lines = [
        f"[{format_timestamp(e.t_start)}-{format_timestamp(e.t_end)}] {e.description}"
        for e in sorted(history, key=lambda e: (e.t_start, e.entry_id))
    ]

    def render(kept: list[str]) -> str:
        history_block = "\n".join(kept) if kept else "(none)"
        return (
            f"HISTORY:\n{history_block}\n"
            f"CURRENT:\n{current_caption}\n"
            f"QUESTION:\n{question}"
        )

    doc = render(lines)
    while len(doc) > budget_chars and lines:
        lines = lines[1:]
        doc = render(lines)
    return doc


# --- summaries --------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryStep:
    t_start: MediaTime
    t_end: MediaTime
    text: str

    def to_payload(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end, "text": self.text}


@dataclass(frozen=True)
class StepSummary:
    steps: tuple[SummaryStep, ...]
    source_entry_ids: tuple[int, ...]
    text: str

    def to_payload(self) -> dict:
        return {
            "steps": [s.to_payload() for s in self.steps],
            "source_entry_ids": list(self.source_entry_ids),
            "text": self.text,
        }


def collapse_steps(entries: list[MemoryEntry]) -> list[SummaryStep]:
    """Merge runs of consecutive entries with the same normalized description
    into single steps spanning the whole run."""
    steps: list[SummaryStep] = []
    for entry in entries:
        if steps and normalize(steps[-1].text) == normalize(entry.description):
            prev = steps[-1]
            steps[-1] = SummaryStep(t_start=prev.t_start, t_end=entry.t_end, text=prev.text)
        else:
            steps.append(SummaryStep(t_start=entry.t_start, t_end=entry.t_end, text=entry.description))
    return steps


def render_steps(steps: list[SummaryStep]) -> str:
    return "\n".join(
        f"{i}. {s.text} [{format_timestamp(s.t_start)}-{format_timestamp(s.t_end)}]"
        for i, s in enumerate(steps, start=1)
    )


def summarize_window(
    log: MemoryLog, t_lo: MediaTime, t_hi: MediaTime, chat_adapter=None
) -> StepSummary:
    """Numbered-step recap of [t_lo, t_hi] from the memory log.

    With a mock (or absent) chat adapter the step texts are the entry
    descriptions verbatim; a real chat adapter gets one rewrite call over
    the rendered steps and supplies the prose.
    """
    entries = log.query_by_time(t_lo, t_hi)
    if not entries:
        raise EmptyWindow(f"no memory entries in [{t_lo}, {t_hi}]")
    steps = collapse_steps(entries)
    rendered = render_steps(steps)
    if chat_adapter is not None and not getattr(chat_adapter, "is_mock", True):
        prompt = f"Rewrite these observed steps as a short recap:\n{rendered}"
        text = chat_adapter.chat((), context=rendered, query=prompt)
    else:
        text = rendered
    return StepSummary(
        steps=tuple(steps),
        source_entry_ids=tuple(e.entry_id for e in entries),
        text=text,
    )
