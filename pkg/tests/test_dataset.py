import hashlib
import json
from datetime import datetime, timezone

import pytest

from rolepersona.dataset import DatasetSample, build_subset, export_jsonl, load_jsonl, samples_jsonl
from rolepersona.errors import SchemaViolation, TestLeak
from rolepersona.interview import InterviewKind, InterviewRecord, Turn, record_digest
from rolepersona.pyllm import ChatMessage


def _record(character: str, questions, kind=InterviewKind.SINGLE) -> InterviewRecord:
    scale_id = questions[0].scale_id
    return InterviewRecord(
        record_id=record_digest(character, scale_id, kind, [q.id for q in questions]),
        character=character,
        scale_id=scale_id,
        kind=kind,
        turns=tuple(
            Turn(
                question_id=q.id,
                question_text=q.text,
                response_text=f"{character} on {q.id}",
                dimension_code=q.dimension_code,
            )
            for q in questions
        ),
        generator_model="gpt-4o",
        created_at=datetime(2024, 6, 1, tzinfo=timezone.utc),
        system_prompt=f"I want you to act like {character}.",
    )


@pytest.fixture
def kept(bank):
    sixteen = bank.scale("16P").questions
    return [
        _record("Alice", [sixteen[0]]),
        _record("Bob", [sixteen[1]]),
        _record("Alice", [bank.question("BSRI", "BSRI-01")]),
        _record("Bob", list(sixteen[5:10]), InterviewKind.MULTI),
    ]


def test_subsets_split_records(kept, bank, registry):
    full, full_manifest = build_subset("FullSingle", kept, bank, registry)
    part, part_manifest = build_subset("PartSingle", kept, bank, registry)
    multi, multi_manifest = build_subset("PartMulti", kept, bank, registry)

    assert full_manifest.sample_count == 3
    # BSRI sits outside the Part subset
    assert part_manifest.sample_count == 2
    assert multi_manifest.sample_count == 1
    assert multi_manifest.turn_count == 5
    assert multi_manifest.question_count == 5
    assert full_manifest.question_ids == ("16P/16P-01", "16P/16P-02", "BSRI/BSRI-01")
    assert part_manifest.character_roster == ("Alice", "Bob")
    assert full_manifest.reference_counts["samples"] == 32089
    assert all(sample.id.startswith("FullSingle-") for sample in full)
    assert [m.role for m in multi[0].messages] == ["system"] + ["user", "assistant"] * 5
    assert part[0].subset_tags == frozenset({"Part", "Single"})


def test_content_digest_is_deterministic(kept, bank, registry):
    _, first = build_subset("PartSingle", kept, bank, registry)
    _, second = build_subset("PartSingle", list(reversed(kept)), bank, registry)
    samples, _ = build_subset("PartSingle", kept, bank, registry)
    assert first.content_digest == second.content_digest
    assert first.content_digest == hashlib.sha256(samples_jsonl(samples)).hexdigest()


def test_test_characters_never_export(kept, bank, registry):
    leaked = kept + [_record("Tess", [bank.question("16P", "16P-03")])]
    with pytest.raises(TestLeak, match="Tess"):
        build_subset("FullSingle", leaked, bank, registry)


def test_empty_subset_warns(bank, registry, caplog):
    samples, manifest = build_subset("PartMulti", [], bank, registry)
    assert samples == []
    assert manifest.sample_count == 0
    assert manifest.content_digest == hashlib.sha256(b"").hexdigest()
    assert "Subset PartMulti is empty" in caplog.text


def test_unknown_subset(bank, registry):
    with pytest.raises(ValueError):
        build_subset("HalfSingle", [], bank, registry)


def test_export_and_load(kept, bank, registry, tmp_path):
    samples, _ = build_subset("FullSingle", kept, bank, registry)
    path = export_jsonl(samples, tmp_path / "out" / "FullSingle.jsonl")

    lines = path.read_text("utf-8").splitlines()
    assert len(lines) == 3
    assert set(json.loads(lines[0])) == {"id", "character", "messages"}
    loaded = load_jsonl(path)
    assert [s.id for s in loaded] == sorted(s.id for s in samples)
    assert loaded[0].messages == samples[0].messages


def test_load_rejects_broken_lines(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"id": "x", "character": "A", "messages": []}\n', encoding="utf-8")
    with pytest.raises(SchemaViolation) as exc:
        load_jsonl(path)
    assert exc.value.pointer == "/0"


def test_sample_roles_are_checked():
    system = ChatMessage(role="system", content="s")
    user = ChatMessage(role="user", content="u")
    assistant = ChatMessage(role="assistant", content="a")
    with pytest.raises(ValueError):
        DatasetSample(id="x", character="A", messages=(system, user))
    with pytest.raises(ValueError):
        DatasetSample(id="x", character="A", messages=(system, user, assistant), subset_tags=frozenset({"Multi"}))
    assert DatasetSample(id="x", character="A", messages=(system, user, assistant)).export_row()["id"] == "x"
