"""Active-learning controller: pool -> query -> annotate -> retrain.

Each round scores the unlabeled pool, selects a batch (ties to lowest
id), takes annotations (revealed gold in simulation, human tags live),
retrains from the previous snapshot by default, and evaluates. Also
hosts the transfer protocol: pretrain on a mapped source corpus,
zero-shot evaluate, few-shot fine-tune.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .corpus import CorpusSplit, LabelScheme, TokenSequence, map_labels
from .crf import CrfModel, TrainConfig, train, viterbi_decode
from .features import ALL_TEMPLATES, FeatureEncoder
from .metrics import Metrics, count_corrections, evaluate_model, model_token_correct
from .records import AnnotationRecord, RoundRecord
from .strategies import (
    STRATEGY_IDS,
    build_similarity,
    score_bald,
    score_pool,
    select_batch_bald,
    select_top,
)

__all__ = [
    "LoopConfig",
    "RoundPlan",
    "ActiveLoop",
    "run_simulation",
    "run_live_round",
    "pretrain_source",
    "zero_shot_eval",
    "few_shot_finetune",
]

STOP_RULES = ("budget", "plateau")


@dataclass(frozen=True)
class LoopConfig:
    strategy: str = "ltp"
    batch_size: int = 10
    rounds_budget: int = 10
    seed_size: int = 0
    passes: int = 10
    beta: float = 1.0
    retrain_epochs: int = 5
    learning_rate: float = 0.2
    l2: float = 1e-4
    train_batch_size: int = 8
    stop_rule: str = "budget"
    plateau_epsilon: float = 1e-3
    plateau_window: int = 2
    rng_seed: int = 0
    warm_start: bool = True
    token_averaged_bald: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGY_IDS:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGY_IDS}")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"unknown stop rule {self.stop_rule!r}; expected one of {STOP_RULES}")
        for name in ("batch_size", "rounds_budget", "seed_size", "passes",
                     "retrain_epochs", "plateau_window"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.batch_size == 0:
            raise ValueError("batch_size must be >= 1")
        if self.plateau_epsilon <= 0:
            raise ValueError("plateau_epsilon must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "batch_size": self.batch_size,
            "rounds_budget": self.rounds_budget,
            "seed_size": self.seed_size,
            "passes": self.passes,
            "beta": self.beta,
            "retrain_epochs": self.retrain_epochs,
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "train_batch_size": self.train_batch_size,
            "stop_rule": self.stop_rule,
            "plateau_epsilon": self.plateau_epsilon,
            "plateau_window": self.plateau_window,
            "rng_seed": self.rng_seed,
            "warm_start": self.warm_start,
            "token_averaged_bald": self.token_averaged_bald,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LoopConfig":
        known = {f: payload[f] for f in cls.__dataclass_fields__ if f in payload}
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown loop config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass(frozen=True)
class RoundPlan:
    """An open round: what was queried and what the model suggested."""

    round_index: int
    queried_ids: tuple[str, ...]
    scores: dict
    suggestions: dict
    theta_version: int


def _train_round_seed(rng_seed: int, round_index: int) -> int:
    # distinct, reproducible stream per retraining round
    return rng_seed + 7919 * (round_index + 1)


class ActiveLoop:
    """Single-writer loop state; scoring reads an immutable snapshot.

    Oracle mode (every pool instance carries gold) powers simulations
    and exact inclusive accuracy; without gold, the inclusive metric's
    model share is estimated from validation token accuracy.
    """

    def __init__(
        self,
        split: CorpusSplit,
        config: LoopConfig,
        scheme: LabelScheme,
        encoder: FeatureEncoder | None = None,
        model: CrfModel | None = None,
        hard_bio_constraints: bool = True,
    ):
        self.config = config
        self.scheme = scheme
        seed = list(split.seed)
        if config.seed_size:
            seed = seed[: config.seed_size]
        self.labeled: list[TokenSequence] = seed
        self.pool: dict[str, TokenSequence] = {seq.id: seq for seq in split.pool}
        self.validation = list(split.validation)
        self.test = list(split.test)
        self.oracle = all(seq.gold_tags is not None for seq in split.pool)
        if encoder is None:
            encoder = FeatureEncoder(
                templates=ALL_TEMPLATES, dropout_rate=0.25 if config.passes > 1 else 0.0
            )
            encoder.fit([seq.words for seq in seed] + [seq.words for seq in split.pool])
            encoder.freeze()
        self.encoder = encoder
        if model is None:
            model = CrfModel.initialize(scheme, encoder, hard_bio_constraints)
            if self.labeled:
                model = train(model, self.labeled, self._train_config(0))
        self.model = model
        self._sim = (
            build_similarity(list(split.pool), config.beta)
            if config.strategy == "id" and split.pool
            else None
        )
        self.records: list[RoundRecord] = []
        self.stop_reason: str | None = None
        self._open: RoundPlan | None = None
        self._cumulative_corrections = 0

    def _train_config(self, round_index: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.config.retrain_epochs,
            learning_rate=self.config.learning_rate,
            l2=self.config.l2,
            batch_size=self.config.train_batch_size,
            rng_seed=_train_round_seed(self.config.rng_seed, round_index),
        )

    @property
    def round_index(self) -> int:
        return len(self.records)

    def _suggest(self, seq: TokenSequence) -> tuple[str, ...]:
        path = viterbi_decode(self.model, seq).best_path
        return tuple(path[i] for i in seq.word_initial_positions)

    def open_round(self) -> RoundPlan:
        if self.stop_reason is not None:
            raise RuntimeError(f"loop already stopped ({self.stop_reason})")
        if self._open is not None:
            return self._open
        if not self.pool:
            raise RuntimeError("pool is empty")
        pool = [self.pool[i] for i in sorted(self.pool)]
        batch = min(self.config.batch_size, len(pool))
        round_seed = self.config.rng_seed + self.round_index
        if self.config.strategy == "batchbald":
            selected = select_batch_bald(
                self.model, pool, batch, self.config.passes, round_seed
            )
            scores = {
                i: score_bald(self.model, self.pool[i], self.config.passes, round_seed)
                for i in selected
            }
        else:
            all_scores = score_pool(
                self.model,
                pool,
                self.config.strategy,
                passes=self.config.passes,
                rng_seed=round_seed,
                sim=self._sim,
                token_averaged_bald=self.config.token_averaged_bald,
            )
            selected = select_top(all_scores, batch)
            by_id = {s.instance_id: s for s in all_scores}
            scores = {i: by_id[i] for i in selected}
        self._open = RoundPlan(
            round_index=self.round_index,
            queried_ids=tuple(selected),
            scores=scores,
            suggestions={i: self._suggest(self.pool[i]) for i in selected},
            theta_version=self.model.theta_version,
        )
        return self._open

    def complete_round(self, annotations: list[AnnotationRecord]) -> RoundRecord:
        plan = self._open
        if plan is None:
            raise RuntimeError("no open round")
        queried = set(plan.queried_ids)
        seen: dict[str, AnnotationRecord] = {}
        for record in annotations:
            if record.instance_id not in queried:
                raise ValueError(f"annotation for non-queried instance {record.instance_id}")
            if record.instance_id in seen:
                raise ValueError(f"duplicate annotation for {record.instance_id}")
            seen[record.instance_id] = record
        missing = queried - set(seen)
        if missing:
            raise ValueError(f"round incomplete; missing annotations for {sorted(missing)}")

        per_instance: dict[str, int] = {}
        per_seconds: dict[str, float] = {}
        for instance_id in plan.queried_ids:
            record = seen[instance_id]
            seq = self.pool[instance_id]
            if len(record.final_tags) != seq.n_words:
                raise ValueError(
                    f"annotation for {instance_id} has {len(record.final_tags)} tags "
                    f"for {seq.n_words} words"
                )
            per_instance[instance_id] = count_corrections(
                plan.suggestions[instance_id], record.final_tags
            )
            if record.started_at is not None and record.submitted_at is not None:
                per_seconds[instance_id] = record.submitted_at - record.started_at
            self.labeled.append(seq.with_word_tags(record.final_tags))
            del self.pool[instance_id]

        round_corrections = sum(per_instance.values())
        self._cumulative_corrections += round_corrections
        workload = {
            "per_instance": per_instance,
            "round_corrections": round_corrections,
            "cumulative_corrections": self._cumulative_corrections,
        }
        if per_seconds:
            workload["per_instance_seconds"] = per_seconds

        started = time.perf_counter()
        base = self.model
        if not self.config.warm_start:
            fresh = CrfModel.initialize(
                self.scheme, self.encoder, self.model.hard_bio_constraints
            )
            base = replace(fresh, theta_version=self.model.theta_version)
        self.model = train(base, self.labeled, self._train_config(plan.round_index + 1))
        retrain_seconds = time.perf_counter() - started

        exclusive = (
            evaluate_model(self.model, self.test).to_dict()
            if self.test
            else Metrics(0.0, 0.0, 0.0, 0, 0, 0).to_dict()
        )
        inclusive = self._inclusive_metrics()

        reason = self._stop_reason_after(exclusive["f1"])
        record = RoundRecord(
            round_index=plan.round_index,
            queried_ids=plan.queried_ids,
            scores=tuple(plan.scores[i] for i in plan.queried_ids),
            annotations=tuple(seen[i] for i in plan.queried_ids),
            exclusive=exclusive,
            inclusive=inclusive,
            workload=workload,
            labeled_count=len(self.labeled),
            theta_version=self.model.theta_version,
            retrain_seconds=retrain_seconds,
            stop_reason=reason,
        )
        self.records.append(record)
        self.stop_reason = reason
        self._open = None
        return record

    def _inclusive_metrics(self) -> dict:
        """(human-annotated correct + model-annotated correct) / total.

        Human tokens define their own reference; the model's share is
        exact against hidden gold in oracle mode, otherwise estimated
        from validation token accuracy.
        """
        human_tokens = sum(seq.n_words for seq in self.labeled)
        remaining = [self.pool[i] for i in sorted(self.pool)]
        model_tokens = sum(seq.n_words for seq in remaining)
        if self.oracle and remaining:
            model_correct, _ = model_token_correct(self.model, remaining)
            estimated = False
        elif remaining:
            rate = self._validation_token_accuracy()
            model_correct = rate * model_tokens
            estimated = True
        else:
            model_correct, estimated = 0, False
        total = human_tokens + model_tokens
        return {
            "accuracy": (human_tokens + model_correct) / total if total else 0.0,
            "human_tokens": human_tokens,
            "model_tokens": model_tokens,
            "model_correct": model_correct,
            "estimated": estimated,
        }

    def _validation_token_accuracy(self) -> float:
        usable = [seq for seq in self.validation if seq.gold_tags is not None]
        if not usable:
            return 0.0
        correct, total = model_token_correct(self.model, usable)
        return correct / total if total else 0.0

    def _stop_reason_after(self, _f1: float) -> str | None:
        if self.config.stop_rule == "plateau":
            history = [r.exclusive["f1"] for r in self.records] + [_f1]
            k = self.config.plateau_window
            if len(history) > k:
                tail = history[-(k + 1) :]
                if all(
                    abs(b - a) < self.config.plateau_epsilon
                    for a, b in zip(tail, tail[1:])
                ):
                    return "plateau"
        if self.round_index + 1 >= self.config.rounds_budget:
            return "budget"
        if not self.pool:
            return "pool_exhausted"
        return None

    def run(self, annotator_id: str = "oracle") -> list[RoundRecord]:
        """Simulated session: gold answers every query until stopping."""
        if not self.oracle:
            raise RuntimeError("simulation requires gold tags on every pool instance")
        if not self.pool and self.stop_reason is None:
            self.stop_reason = "pool_exhausted"
        while self.stop_reason is None:
            plan = self.open_round()
            annotations = [
                AnnotationRecord(
                    instance_id=i,
                    annotator_id=annotator_id,
                    final_tags=self.pool[i].word_tags,
                    suggestion_theta_version=plan.theta_version,
                )
                for i in plan.queried_ids
            ]
            self.complete_round(annotations)
        return self.records


def run_simulation(
    split: CorpusSplit,
    config: LoopConfig,
    scheme: LabelScheme,
    encoder: FeatureEncoder | None = None,
    hard_bio_constraints: bool = True,
) -> list[RoundRecord]:
    loop = ActiveLoop(split, config, scheme, encoder, hard_bio_constraints=hard_bio_constraints)
    return loop.run()


def run_live_round(loop: ActiveLoop, annotations: list[AnnotationRecord]) -> RoundRecord:
    """Human tags replace gold; workload comes from actual edits."""
    return loop.complete_round(annotations)


def pretrain_source(
    model: CrfModel,
    source: list[TokenSequence],
    scheme: LabelScheme,
    opts: TrainConfig | None = None,
) -> CrfModel:
    """Supervised pretraining on a source corpus with mapped labels."""
    if not source:
        return model
    mapped = [map_labels(seq, scheme) for seq in source]
    return train(model, mapped, opts or TrainConfig())


def zero_shot_eval(model: CrfModel, target_test: list[TokenSequence]) -> Metrics:
    """Entity-level micro P/R/F1 with no target-side training at all."""
    return evaluate_model(model, target_test)


def few_shot_finetune(
    model: CrfModel,
    shots: list[TokenSequence],
    opts: TrainConfig | None = None,
) -> CrfModel:
    """Continue training the pretrained snapshot on k target instances."""
    if not shots:
        return model
    return train(model, shots, opts or TrainConfig())
