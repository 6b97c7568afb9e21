"""Recommendation agent: re-rank, prompt, parse, explain and self-correct."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .llm.parsing import ParseFailure, parse_explanations, parse_ranked_items, parse_weight_proposal
from .llm.prompts import format_weight, item_blocks, item_line, render_prompt
from .memory import MemoryStore
from .profiles import Profile, truncate_words
from .rerank import RerankWeights, history_categories, rerank

logger = logging.getLogger(__name__)

HISTORY_LEN = 5
EXPLANATION_WORDS = 15


class TaskKind(str, Enum):
    DIRECT = "direct"
    SEQUENTIAL = "sequential"
    EXPLANATION = "explanation"


@dataclass(frozen=True)
class Candidate:
    profile: Profile
    pop: float

    @property
    def item_id(self) -> str:
        return self.profile.owner_id


@dataclass
class RecommendationResult:
    user_id: str
    task: TaskKind
    ranked_items: list[str]
    weights_used: RerankWeights
    presented: list[str] = field(default_factory=list)
    explanations: dict[str, str] | None = None
    feedback_rounds: int = 0
    parse_degradations: int = 0

    def to_json(self) -> dict:
        out = {
            "user": self.user_id,
            "task": self.task.value,
            "ranked": self.ranked_items,
            "weights": self.weights_used.to_json(),
            "rounds": self.feedback_rounds,
            "parse_degradations": self.parse_degradations,
        }
        if self.explanations is not None:
            out["explanations"] = self.explanations
        return out


@dataclass
class FeedbackRecord:
    round: int
    old_weights: RerankWeights
    new_weights: RerankWeights
    reasoning: str
    hit_after: bool
    fallback: bool = False

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "old_weights": self.old_weights.to_json(),
            "new_weights": self.new_weights.to_json(),
            "reasoning": self.reasoning,
            "hit_after": self.hit_after,
            "fallback": self.fallback,
        }


def shift_to_category(w: RerankWeights, step: float = 0.1) -> RerankWeights:
    """Fallback adjustment when no weight proposal can be parsed."""
    moved = min(step, w.alpha)
    return RerankWeights.normalized(w.alpha - moved, w.beta + moved, w.gamma)


def shared_category(user: Profile, item: Profile) -> str | None:
    for cat in item.summaries:
        if cat in user.categories:
            return cat
    return None


class Agent:
    """Runs the recommendation tasks against one backend.

    ``use_rr`` switches between presenting the re-ranked top ``rerank_top_k``
    and the raw pool (cut to ``prompt_budget`` when set).  ``store``, when
    given, receives one log entry per task run and one per feedback round.
    ``category_source="history"`` takes C(u) from the purchased items'
    categories instead of the user profile.
    """

    def __init__(
        self,
        backend,
        *,
        top_k: int = 10,
        rerank_top_k: int = 30,
        use_rr: bool = True,
        prompt_budget: int | None = None,
        store: MemoryStore | None = None,
        history_len: int = HISTORY_LEN,
        category_source: str = "profile",
    ):
        if category_source not in ("profile", "history"):
            raise ValueError(f"unknown category_source {category_source!r}")
        if rerank_top_k < top_k:
            raise ValueError(f"rerank_top_k ({rerank_top_k}) must be >= top_k ({top_k})")
        self.backend = backend
        self.top_k = top_k
        self.rerank_top_k = rerank_top_k
        self.use_rr = use_rr
        self.prompt_budget = prompt_budget
        self.store = store
        self.history_len = history_len
        self.category_source = category_source

    # -- presentation -----------------------------------------------------

    def present(
        self, user: Profile, pool: Sequence[Candidate], w: RerankWeights, history: Sequence[Profile] = ()
    ) -> list[Candidate]:
        if not pool:
            raise ValueError("empty candidate pool")
        if not self.use_rr:
            return list(pool[: self.prompt_budget] if self.prompt_budget else pool)
        by_id = {c.item_id: c for c in pool}
        cu = history_categories(history) if self.category_source == "history" else None
        scored = rerank(user, [(c.profile, c.pop) for c in pool], w, self.rerank_top_k, user_categories=cu)
        return [by_id[s.item_id] for s in scored]

    def _task_prompt(self, task: TaskKind, user: Profile, shown: Sequence[Candidate], history: Sequence[Profile]) -> str:
        bindings = {
            "user_profile_text": user.render(),
            "n_items": len(shown),
            "item_blocks": item_blocks([(c.item_id, c.profile.summaries) for c in shown]),
            "top_k": self.top_k,
        }
        if task is TaskKind.SEQUENTIAL:
            recent = history[-self.history_len:]
            bindings["recent_items_text"] = "".join("\n" + item_line(p.owner_id, p.summaries) for p in recent)
            return render_prompt("sequential_rec", bindings)
        return render_prompt("direct_rec", bindings)

    def _ask(self, task: TaskKind, user: Profile, shown: Sequence[Candidate], history: Sequence[Profile]) -> tuple[list[str], int]:
        template = "sequential_rec" if task is TaskKind.SEQUENTIAL else "direct_rec"
        reply = self.backend.complete(self._task_prompt(task, user, shown, history), template)
        ids = [c.item_id for c in shown]
        try:
            parsed = parse_ranked_items(reply, ids, self.top_k)
        except ParseFailure:
            logger.warning("unparseable %s reply for %s; using presented order", task.value, user.owner_id)
            return ids[: self.top_k], 1
        return parsed.items, int(parsed.padded > 0)

    def _log(self, kind: str, payload: dict) -> None:
        if self.store is not None:
            self.store.append_log(kind, payload)

    # -- tasks ------------------------------------------------------------

    def recommend(
        self,
        task: TaskKind,
        user: Profile,
        pool: Sequence[Candidate],
        w: RerankWeights,
        history: Sequence[Profile] = (),
        *,
        log: bool = True,
    ) -> RecommendationResult:
        task = TaskKind(task)
        if task is TaskKind.SEQUENTIAL:
            if not history:
                raise ValueError("sequential recommendation needs a purchase history")
            seen = {p.owner_id for p in history}
            pool = [c for c in pool if c.item_id not in seen]
        shown = self.present(user, pool, w, history)
        ranked, degraded = self._ask(TaskKind.SEQUENTIAL if task is TaskKind.SEQUENTIAL else TaskKind.DIRECT, user, shown, history)
        result = RecommendationResult(
            user_id=user.owner_id,
            task=task,
            ranked_items=ranked,
            weights_used=w,
            presented=[c.item_id for c in shown],
            parse_degradations=degraded,
        )
        if task is TaskKind.EXPLANATION:
            by_id = {c.item_id: c.profile for c in shown}
            result.explanations = self.generate_explanations(user, [by_id[i] for i in ranked])
        if log:
            self._log("recommendation", dict(result.to_json(), use_rr=self.use_rr))
        return result

    def direct_recommend(self, user, pool, w, **kw) -> RecommendationResult:
        return self.recommend(TaskKind.DIRECT, user, pool, w, **kw)

    def sequential_recommend(self, user, history, pool, w, **kw) -> RecommendationResult:
        return self.recommend(TaskKind.SEQUENTIAL, user, pool, w, history, **kw)

    def generate_explanations(self, user: Profile, items: Sequence[Profile]) -> dict[str, str]:
        """One sentence of at most 15 words per item.

        Items the reply does not cover get ``matches on <category>``, naming a
        category shared with the user when there is one.
        """
        if not items:
            return {}
        prompt = render_prompt(
            "explanation",
            {
                "user_profile_text": user.render(),
                "n_items": len(items),
                "item_blocks": item_blocks([(p.owner_id, p.summaries) for p in items]),
                "top_k": len(items),
            },
        )
        reply = self.backend.complete(prompt, "explanation")
        parsed = parse_explanations(reply, [p.owner_id for p in items])
        out = {}
        for p in items:
            text = parsed.get(p.owner_id)
            if not text:
                cat = shared_category(user, p) or next(iter(p.summaries), "General")
                text = f"matches on {cat}"
            out[p.owner_id] = truncate_words(text, EXPLANATION_WORDS)
        return out

    # -- self-feedback ----------------------------------------------------

    def self_feedback_loop(
        self,
        task: TaskKind,
        user: Profile,
        pool: Sequence[Candidate],
        initial_w: RerankWeights,
        ground_truth: str,
        max_rounds: int = 3,
        history: Sequence[Profile] = (),
    ) -> tuple[RecommendationResult, list[FeedbackRecord]]:
        """Re-run the task while the held-out item is missed, up to ``max_rounds`` times.

        With re-ranking on, each round asks for new weights and re-ranks the
        pool; without it, each round asks for a different selection from the
        same candidates.
        """
        if max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if ground_truth not in {c.item_id for c in pool}:
            raise ValueError(f"ground truth {ground_truth} not in the candidate pool")
        task = TaskKind(task)
        result = self.recommend(task, user, pool, initial_w, history)
        by_id = {c.item_id: c.profile for c in pool}
        gt_profile = by_id[ground_truth]
        records: list[FeedbackRecord] = []
        w = initial_w
        while ground_truth not in result.ranked_items and len(records) < max_rounds:
            rnd = len(records) + 1
            prev_text = "\n".join(item_line(i, by_id[i].summaries) for i in result.ranked_items)
            degraded = result.parse_degradations
            if self.use_rr:
                prompt = render_prompt(
                    "feedback_rr",
                    {
                        "user_profile_text": user.render(),
                        "prev_recommended_text": prev_text,
                        "selected_item_text": item_line(ground_truth, gt_profile.summaries),
                        "alpha": format_weight(w.alpha),
                        "beta": format_weight(w.beta),
                        "gamma": format_weight(w.gamma),
                    },
                )
                reply = self.backend.complete(prompt, "feedback_rr")
                fallback = False
                try:
                    proposal = parse_weight_proposal(reply)
                    new_w, reasoning = proposal.weights, proposal.reasoning
                except ParseFailure:
                    new_w, reasoning, fallback = shift_to_category(w), "fallback: +0.1 to category weight", True
                    degraded += 1
                rerun = self.recommend(task, user, pool, new_w, history, log=False)
                rerun.parse_degradations += degraded
                kind = "weight_change"
            else:
                new_w, fallback = w, False
                rerun, reasoning = self._norr_round(task, user, pool, w, result, prev_text, history)
                rerun.parse_degradations += degraded
                kind = "feedback"
            hit = ground_truth in rerun.ranked_items
            rec = FeedbackRecord(rnd, w, new_w, reasoning, hit, fallback)
            records.append(rec)
            self._log(kind, dict(rec.to_json(), user=user.owner_id, task=task.value, ranked=rerun.ranked_items))
            result, w = rerun, new_w
        result.feedback_rounds = len(records)
        return result, records

    def _norr_round(self, task, user, pool, w, previous, prev_text, history):
        seen = {p.owner_id for p in history} if task is TaskKind.SEQUENTIAL else set()
        shown = self.present(user, [c for c in pool if c.item_id not in seen], w, history)
        ids = [c.item_id for c in shown]
        prompt = render_prompt(
            "feedback_norr",
            {
                "user_profile_text": user.render(),
                "prev_recommended_text": prev_text,
                "item_blocks": item_blocks([(c.item_id, c.profile.summaries) for c in shown]),
                "top_k": self.top_k,
            },
        )
        reply = self.backend.complete(prompt, "feedback_norr")
        degraded = 0
        try:
            parsed = parse_ranked_items(reply, ids, self.top_k)
            ranked = parsed.items
            degraded = int(parsed.padded > 0)
        except ParseFailure:
            # prefer items not shown last time, then fill from the rest
            before = set(previous.ranked_items)
            ranked = ([i for i in ids if i not in before] + [i for i in ids if i in before])[: self.top_k]
            degraded = 1
        result = RecommendationResult(
            user_id=user.owner_id,
            task=task,
            ranked_items=ranked,
            weights_used=w,
            presented=ids,
            parse_degradations=degraded,
        )
        if task is TaskKind.EXPLANATION:
            by_id = {c.item_id: c.profile for c in shown}
            result.explanations = self.generate_explanations(user, [by_id[i] for i in ranked])
        return result, "re-strategized selection over the unranked pool"
