"""Pipeline stages: generate, filter, export, eval and report."""

from __future__ import annotations

import asyncio
import logging
import time
from collections import defaultdict
from typing import Any, Iterable, Literal

import pandas as pd
from pydantic import BaseModel
from tqdm import tqdm

from .assessor import (
    AssessmentResult,
    Assessor,
    FilterOutcome,
    assessment_frame,
    filter_records,
)
from .characters import CharacterProfile, Registry, ground_truth_for, load_registry, split_registry
from .config import RunConfig
from .const import EVAL_METRICS
from .dataset import build_subset, export_jsonl
from .errors import (
    ConfigError,
    EmptyResponse,
    InsufficientDimensions,
    InterviewFailed,
    RolePersonaError,
    TestLeak,
)
from .evaluation.dimensional import DimensionalScore, average_dimensional, dimensional_scores
from .evaluation.fidelity import consistency_run, personality_fidelity_run
from .evaluation.mcq import load_mcq, run_mcq
from .evaluation.roleplay import RolePlayItem, fill_candidates, load_roleplay_items, transcripts_by_character
from .evaluation.rouge import rouge_report
from .evaluation.winrate import run_win_rate
from .interview import InterviewEngine, InterviewRecord
from .pyllm import LLMGatewayClient, LLMGatewayError, ResponseCache, ScriptedTransport
from .pyllm.const import MOCK_BASE_URL
from .scale_bank import Question, Scale, ScaleBank, load_scale_bank
from .store import (
    ASSESSMENTS,
    ASSESSMENTS_CSV,
    KEPT,
    MANIFEST,
    OUTCOMES,
    RECORDS,
    VERDICTS,
    ArtifactStore,
    export_manifest_path,
    export_path,
    report_path,
)
from .templates import PromptLibrary

_LOGGER = logging.getLogger(__name__)

SUBJECT = "subject"
GENERATOR = "generator"
JUDGE = "judge"


class StageCounts(BaseModel):
    generated: int | None = None
    excluded: int | None = None
    failed: int | None = None
    filtered: int | None = None
    exported: int | None = None

    @property
    def reconciles(self) -> bool | None:
        values = (self.generated, self.excluded, self.failed, self.filtered, self.exported)
        if any(value is None for value in values):
            return None
        return self.generated == self.exported + self.excluded + self.filtered + self.failed


class UnitStatus(BaseModel):
    """Outcome of one planned interview unit: a single question or a multi-turn scale session."""

    character: str
    scale_id: str
    unit: str
    status: Literal["ok", "excluded", "failed"]
    reason: str | None = None
    record_id: str | None = None


class RunManifest(BaseModel):
    """Counts, gateway usage and timing of every stage run against one output directory."""

    config_digest: str
    seed: int | None = None
    units: list[UnitStatus] = []
    counts: StageCounts = StageCounts()
    stage_seconds: dict[str, float] = {}
    gateway: dict[str, Any] = {}
    metrics: dict[str, str] = {}


def build_gateway(config: RunConfig) -> LLMGatewayClient:
    settings = config.gateway
    cache = ResponseCache(settings.cache_dir) if settings.cache_dir else None
    common = dict(
        models=settings.models,
        retry_budget=settings.retry_budget,
        backoff_base=settings.backoff_base,
        timeout=settings.timeout,
        concurrency=settings.concurrency,
        cache=cache,
    )
    if settings.mock_script is not None:
        transport = ScriptedTransport.from_file(settings.mock_script, latency=settings.mock_latency)
        _LOGGER.info("Mock mode: answering from %s", settings.mock_script)
        return LLMGatewayClient(MOCK_BASE_URL, transport=transport, **common)
    return LLMGatewayClient(settings.endpoint, config.api_key(), **common)


class PipelineCoordinator:
    """Loads the run's inputs once and runs stages against the artifact store."""

    def __init__(self, config: RunConfig, gateway: LLMGatewayClient | None = None) -> None:
        self.config = config
        self.bank: ScaleBank = load_scale_bank(config.bank_path)
        self.registry: Registry = load_registry(config.registry_path, self.bank)
        self.gateway = gateway or build_gateway(config)
        self.prompts = PromptLibrary(config.prompts_dir)
        self.store = ArtifactStore(config.output_dir)
        self.progress = _LOGGER.isEnabledFor(logging.INFO)
        self._items: list[RolePlayItem] | None = None

    async def __aenter__(self) -> "PipelineCoordinator":
        return self

    async def __aexit__(self, *exc_info: Any) -> None:
        await self.gateway.close()

    def manifest(self) -> RunManifest:
        if self.store.exists(MANIFEST):
            manifest = RunManifest.model_validate(self.store.read_json(MANIFEST))
            if manifest.config_digest == self.config.digest():
                return manifest
            _LOGGER.warning("Config changed since the last run; starting a fresh manifest")
        return RunManifest(config_digest=self.config.digest(), seed=self.config.seed)

    def _save_manifest(self, manifest: RunManifest, stage: str, started: float) -> RunManifest:
        manifest.stage_seconds[stage] = round(time.monotonic() - started, 3)
        manifest.gateway[stage] = self.gateway.stats.as_dict(self.config.gateway.prices)
        self.store.write_json(MANIFEST, manifest.model_dump(mode="json"))
        return manifest

    # generate

    def _training_characters(self) -> list[CharacterProfile]:
        train, test = split_registry(self.registry)
        wanted = self.config.generation.characters
        if wanted is None:
            return train
        leaked = sorted({p.name for p in test} & set(wanted))
        if leaked:
            raise TestLeak(f"Test characters requested for generation: {leaked}")
        return [self.registry.profile(name) for name in wanted]

    def _generation_scales(self) -> tuple[list[Scale], list[Scale]]:
        settings = self.config.generation
        single_ids = settings.scales or sorted(self.bank.scales)
        multi_ids = settings.multi_scales or list(self.bank.part_subset)
        outside = sorted(set(multi_ids) - set(self.bank.part_subset))
        if outside:
            raise ConfigError(f"multi_scales outside the Part subset are never exported: {outside}")
        return [self.bank.scale(s) for s in single_ids], [self.bank.scale(s) for s in multi_ids]

    async def _screen(
        self,
        engine: InterviewEngine,
        character: CharacterProfile,
        questions: list[Question],
    ) -> dict[str, str]:
        """Reasons keyed by the question keys whose screening call failed."""
        outcomes = await asyncio.gather(
            *(engine.judge_suitability(character, q) for q in questions),
            return_exceptions=True,
        )
        failed = {}
        for question, outcome in zip(questions, outcomes):
            if isinstance(outcome, InterviewFailed):
                _LOGGER.error("Screening: %s", outcome)
                failed[f"{question.scale_id}/{question.id}"] = f"screening failed: {outcome}"
            elif isinstance(outcome, BaseException):
                raise outcome
        return failed

    def _unsuitable_reason(self, engine: InterviewEngine, character: CharacterProfile, question: Question) -> str:
        verdict = engine.verdicts.get((character.name, question.scale_id, question.id))
        if verdict is not None and verdict.flagged:
            return "suitability reply unreadable"
        return "unsuitable for the character"

    async def generate(self) -> RunManifest:
        started = time.monotonic()
        settings = self.config.generation
        characters = self._training_characters()
        single_scales, multi_scales = self._generation_scales()
        engine = InterviewEngine(
            self.gateway,
            prompts=self.prompts,
            generator=GENERATOR,
            judge=JUDGE,
            memory_k=settings.memory_k,
            temperature=settings.temperature,
            seed=self.config.seed,
        )
        _LOGGER.info("Generating for %d character(s)", len(characters))

        records: list[InterviewRecord] = []
        units: list[UnitStatus] = []
        screened_scales = {s.id: s for s in single_scales if settings.single}
        screened_scales.update({s.id: s for s in multi_scales if settings.multi})

        for character in tqdm(characters, desc="generate", unit="char", disable=not self.progress):
            questions = [q for scale in screened_scales.values() for q in scale.questions]
            screen_failed = await self._screen(engine, character, questions)

            if settings.single:
                runnable = []
                for question in (q for scale in single_scales for q in scale.questions):
                    unit = dict(character=character.name, scale_id=question.scale_id, unit=question.id)
                    key = f"{question.scale_id}/{question.id}"
                    if key in screen_failed:
                        units.append(UnitStatus(**unit, status="failed", reason=screen_failed[key]))
                    elif not engine.is_suitable(character, question):
                        reason = self._unsuitable_reason(engine, character, question)
                        units.append(UnitStatus(**unit, status="excluded", reason=reason))
                    else:
                        runnable.append(question)
                outcomes = await asyncio.gather(
                    *(engine.run_single_interview(character, q) for q in runnable),
                    return_exceptions=True,
                )
                for question, outcome in zip(runnable, outcomes):
                    unit = dict(character=character.name, scale_id=question.scale_id, unit=question.id)
                    if isinstance(outcome, (InterviewFailed, EmptyResponse)):
                        _LOGGER.error("%s", outcome)
                        units.append(UnitStatus(**unit, status="failed", reason=str(outcome)))
                    elif isinstance(outcome, BaseException):
                        raise outcome
                    else:
                        records.append(outcome)
                        units.append(UnitStatus(**unit, status="ok", record_id=outcome.record_id))

            if settings.multi:
                for scale in multi_scales:
                    unit = dict(character=character.name, scale_id=scale.id, unit="multi")
                    try:
                        record = await engine.run_multi_interview(character, scale, self.config.seed)
                    except InsufficientDimensions as exc:
                        _LOGGER.info("%s", exc)
                        units.append(UnitStatus(**unit, status="excluded", reason=str(exc)))
                    except (InterviewFailed, EmptyResponse) as exc:
                        _LOGGER.error("%s", exc)
                        units.append(UnitStatus(**unit, status="failed", reason=str(exc)))
                    else:
                        records.append(record)
                        units.append(UnitStatus(**unit, status="ok", record_id=record.record_id))

        generated = len(units)
        excluded = sum(u.status == "excluded" for u in units)
        failed = sum(u.status == "failed" for u in units)

        records.sort(key=lambda record: record.record_id)
        self.store.write_jsonl(RECORDS, (r.model_dump(mode="json") for r in records))
        verdicts = sorted(engine.verdicts.values(), key=lambda v: (v.character, v.scale_id, v.question_id))
        self.store.write_json(VERDICTS, [v.model_dump(mode="json") for v in verdicts])

        manifest = self.manifest()
        manifest.counts = StageCounts(generated=generated, excluded=excluded, failed=failed)
        manifest.units = units
        _LOGGER.info(
            "Generated %d record(s) from %d unit(s): %d excluded, %d failed",
            len(records),
            generated,
            excluded,
            failed,
        )
        return self._save_manifest(manifest, "generate", started)

    # filter

    def load_records(self, name: str = RECORDS) -> list[InterviewRecord]:
        return [InterviewRecord.model_validate(row) for row in self.store.read_jsonl(name)]

    async def filter(self) -> list[FilterOutcome]:
        started = time.monotonic()
        records = self.load_records()
        groups: dict[tuple[str, str], list[InterviewRecord]] = defaultdict(list)
        for record in records:
            groups[(record.character, record.scale_id)].append(record)

        assessor = Assessor(self.gateway, prompts=self.prompts, judge=JUDGE, seed=self.config.seed)
        assessments: list[AssessmentResult] = []
        for (character, scale_id), group in tqdm(
            sorted(groups.items()), desc="filter", unit="pair", disable=not self.progress
        ):
            truth = ground_truth_for(self.registry, character, scale_id)
            if truth is None:
                _LOGGER.warning("No ground truth for %s on %s; its records are kept unfiltered", character, scale_id)
                continue
            scale = self.bank.scale(scale_id)
            assessments.append(await assessor.assess_character(character, scale, group, truth.label))

        outcomes = filter_records(records, assessments, self.config.filter.policy)
        kept_ids = {o.record_id for o in outcomes if o.kept}
        self.store.write_json(ASSESSMENTS, [a.model_dump(mode="json") for a in assessments])
        self.store.write_csv(ASSESSMENTS_CSV, assessment_frame(assessments))
        self.store.write_json(OUTCOMES, [o.model_dump(mode="json") for o in outcomes])
        self.store.write_jsonl(KEPT, (r.model_dump(mode="json") for r in records if r.record_id in kept_ids))

        manifest = self.manifest()
        manifest.counts = manifest.counts.model_copy(update={"filtered": len(outcomes) - len(kept_ids)})
        _LOGGER.info("Kept %d of %d record(s)", len(kept_ids), len(outcomes))
        self._save_manifest(manifest, "filter", started)
        return outcomes

    # export

    def export(self) -> dict[str, dict]:
        started = time.monotonic()
        kept = self.load_records(KEPT)
        manifests: dict[str, dict] = {}
        for name in self.config.export.subsets:
            samples, subset_manifest = build_subset(name, kept, self.bank, self.registry, self.prompts)
            export_jsonl(samples, self.store.path(export_path(name)))
            self.store.track(export_path(name))
            manifests[name] = subset_manifest.model_dump(mode="json")
            self.store.write_json(export_manifest_path(name), manifests[name])
            _LOGGER.info("Exported %d sample(s) to %s", subset_manifest.sample_count, export_path(name))

        manifest = self.manifest()
        manifest.counts = manifest.counts.model_copy(update={"exported": len(kept)})
        if manifest.counts.reconciles is False:
            _LOGGER.error("Manifest counts do not reconcile: %s", manifest.counts)
        self._save_manifest(manifest, "export", started)
        return manifests

    # eval

    def test_characters(self) -> list[CharacterProfile]:
        _, test = split_registry(self.registry)
        wanted = self.config.evaluation.characters
        if wanted is None:
            return test
        return [p for p in test if p.name in set(wanted)]

    async def _roleplay_items(self) -> list[RolePlayItem]:
        if self._items is not None:
            return self._items
        path = self.config.evaluation.roleplay_path
        if path is None:
            raise ConfigError("evaluation.roleplay_path is not set")
        items = load_roleplay_items(path, self.registry)
        self._items = await fill_candidates(
            items, self.registry, self.gateway, subject=SUBJECT, seed=self.config.seed, prompts=self.prompts
        )
        return self._items

    async def _eval_pf(self) -> dict:
        settings = self.config.evaluation
        report = await personality_fidelity_run(
            SUBJECT,
            self.test_characters(),
            self.bank,
            self.gateway,
            registry=self.registry,
            scales=settings.scales,
            judge=JUDGE,
            seed=self.config.seed,
            pooling=settings.pooling,
            prompts=self.prompts,
            progress=self.progress,
        )
        self.store.write_csv(report_path("pf", "csv"), assessment_frame(report.results))
        return report.model_dump(mode="json")

    async def _eval_mr(self) -> dict:
        path = self.config.evaluation.mcq_path
        if path is None:
            raise ConfigError("evaluation.mcq_path is not set")
        report = await run_mcq(SUBJECT, load_mcq(path), self.gateway, prompts=self.prompts, seed=self.config.seed)
        frame = pd.DataFrame([o.model_dump() for o in report.outcomes])
        self.store.write_csv(report_path("mr", "csv"), frame)
        return report.model_dump(mode="json")

    async def _eval_rouge(self) -> dict:
        items = await self._roleplay_items()
        report = rouge_report((item.id, item.candidate_answer, item.reference_answer) for item in items)
        self.store.write_csv(report_path("rouge", "csv"), pd.DataFrame([p.model_dump() for p in report.pairs]))
        return report.model_dump(mode="json")

    async def _eval_winrate(self) -> dict:
        items = await self._roleplay_items()
        roles = {name: profile.description for name, profile in self.registry.characters.items()}
        report = await run_win_rate(
            items, self.gateway, roles=roles, judge=JUDGE, seed=self.config.seed, prompts=self.prompts
        )
        return report.model_dump(mode="json")

    async def _eval_dims(self) -> dict:
        items = await self._roleplay_items()
        scores: list[DimensionalScore] = []
        for character, transcript in sorted(transcripts_by_character(items).items()):
            scores.append(
                await dimensional_scores(
                    self.registry.profile(character),
                    transcript,
                    self.gateway,
                    judge=JUDGE,
                    seed=self.config.seed,
                    prompts=self.prompts,
                    transcript_ref=f"{self.config.evaluation.roleplay_path.name}#{character}",
                )
            )
        self.store.write_csv(
            report_path("dims", "csv"),
            pd.DataFrame([s.model_dump(exclude={"transcript_ref"}) for s in scores]),
        )
        return {
            "average": average_dimensional(scores),
            "characters": [s.model_dump(mode="json") for s in scores],
        }

    async def _eval_consistency(self) -> dict:
        settings = self.config.evaluation
        summaries = {}
        for scale_id in settings.consistency_scales:
            summary = await consistency_run(
                SUBJECT,
                self.test_characters(),
                self.bank.scale(scale_id),
                self.gateway,
                judge=JUDGE,
                seed=self.config.seed,
                sample=settings.sample_std,
                prompts=self.prompts,
                progress=self.progress,
            )
            summaries[scale_id] = summary.model_dump(mode="json")
        return summaries

    async def evaluate(self, which: Iterable[str] | None = None) -> dict[str, str]:
        """Run each selected metric in isolation; returns metric -> "ok" or the error text."""
        started = time.monotonic()
        selected = set(which or self.config.evaluation.metrics)
        runners = {
            "pf": self._eval_pf,
            "mr": self._eval_mr,
            "rouge": self._eval_rouge,
            "winrate": self._eval_winrate,
            "dims": self._eval_dims,
            "consistency": self._eval_consistency,
        }
        status: dict[str, str] = {}
        for metric in (m for m in EVAL_METRICS if m in selected):
            try:
                report = await runners[metric]()
            except (RolePersonaError, LLMGatewayError) as exc:
                _LOGGER.error("Metric %s failed: %s", metric, exc)
                status[metric] = f"{type(exc).__name__}: {exc}"
                continue
            self.store.write_json(report_path(metric), report)
            status[metric] = "ok"
            _LOGGER.info("Metric %s written to %s", metric, report_path(metric))

        manifest = self.manifest()
        manifest.metrics.update(status)
        self._save_manifest(manifest, "eval", started)
        return status

    # report

    def summary(self) -> pd.DataFrame:
        rows: list[dict[str, Any]] = []
        if self.store.exists(MANIFEST):
            counts = self.store.read_json(MANIFEST).get("counts", {})
            rows += [{"section": "manifest", "key": k, "value": v} for k, v in counts.items()]
        for metric in EVAL_METRICS:
            if not self.store.exists(report_path(metric)):
                continue
            headline = _headline(metric, self.store.read_json(report_path(metric)))
            rows += [{"section": metric, "key": k, "value": v} for k, v in headline]
        frame = pd.DataFrame(rows, columns=["section", "key", "value"])
        self.store.write_csv(report_path("summary", "csv"), frame)
        return frame


def _headline(metric: str, report: dict) -> list[tuple[str, Any]]:
    if metric == "pf":
        return [
            ("single_accuracy", report["single_accuracy"]),
            ("full_accuracy", report["full_accuracy"]),
            ("coverage", report["coverage"]),
        ]
    if metric == "mr":
        return [("accuracy", report["accuracy"]), ("n_items", report["n_items"])]
    if metric == "rouge":
        return [("mean_f_score", report["mean_f_score"])]
    if metric == "winrate":
        return [("win_rate", report["win_rate"]), ("judged", report["judged"])]
    if metric == "dims":
        return sorted(report["average"].items())
    if metric == "consistency":
        return [(f"{scale}_average_std", summary["average_std"]) for scale, summary in sorted(report.items())]
    return []


async def cmd_generate(config: RunConfig, gateway: LLMGatewayClient | None = None) -> RunManifest:
    async with PipelineCoordinator(config, gateway) as coordinator:
        return await coordinator.generate()


async def cmd_filter(config: RunConfig, gateway: LLMGatewayClient | None = None) -> list[FilterOutcome]:
    async with PipelineCoordinator(config, gateway) as coordinator:
        return await coordinator.filter()


async def cmd_export(config: RunConfig, gateway: LLMGatewayClient | None = None) -> dict[str, dict]:
    async with PipelineCoordinator(config, gateway) as coordinator:
        return coordinator.export()


async def cmd_eval(
    config: RunConfig,
    which: Iterable[str] | None = None,
    gateway: LLMGatewayClient | None = None,
) -> dict[str, str]:
    async with PipelineCoordinator(config, gateway) as coordinator:
        return await coordinator.evaluate(which)


async def cmd_report(config: RunConfig) -> pd.DataFrame:
    async with PipelineCoordinator(config) as coordinator:
        return coordinator.summary()
