import math
import random
import re
from functools import lru_cache

import pytest

from conftest import make_gateway, prompt_text
from rolepersona.characters import load_registry
from rolepersona.const import DATA_DIR, REFERENCE_BANK, REFERENCE_REGISTRY
from rolepersona.errors import (
    EmptyInput,
    KeySetMismatch,
    McqSchemaError,
    NoGroundTruthCoverage,
    RankParseError,
    RoundCountMismatch,
    SchemaViolation,
    ScoreParseError,
)
from rolepersona.evaluation.consistency import ConsistencyReport, consistency, summarize
from rolepersona.evaluation.dimensional import (
    DimensionalScore,
    average_dimensional,
    dimensional_scores,
    render_interactions,
)
from rolepersona.evaluation.fidelity import consistency_run, personality_fidelity_run
from rolepersona.evaluation.mcq import McqItem, load_mcq, mr_accuracy, run_mcq
from rolepersona.evaluation.parsing import parse_option_letter, parse_ranking, parse_score
from rolepersona.evaluation.roleplay import (
    RolePlayItem,
    fill_candidates,
    load_roleplay_items,
    transcripts_by_character,
)
from rolepersona.evaluation.rouge import lcs_length, rouge_l, rouge_l_tokens, rouge_report
from rolepersona.evaluation.winrate import (
    MODEL_A,
    MODEL_B,
    candidate_slot,
    run_win_rate,
    win_rate,
)
from rolepersona.scale_bank import load_scale_bank


def _brute_lcs(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    @lru_cache(maxsize=None)
    def walk(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + walk(i + 1, j + 1)
        return max(walk(i + 1, j), walk(i, j + 1))

    return walk(0, 0)


# Rouge-L


def test_rouge_worked_example():
    assert lcs_length("the cat sat".split(), "the cat ate food".split()) == 2
    assert rouge_l("the cat sat", "the cat ate food") == pytest.approx(2 * 0.5 * (2 / 3) / (0.5 + 2 / 3))
    assert rouge_l("the cat sat", "the cat ate food") == pytest.approx(0.5714, abs=1e-4)


def test_rouge_edge_cases():
    assert rouge_l("Hello, World!", "hello world") == 1.0
    assert rouge_l("alpha beta", "gamma delta") == 0.0
    assert rouge_l("", "anything") == 0.0
    assert rouge_l("...", "!!!") == 0.0
    # order matters
    assert rouge_l("b a", "a b") == 0.5


def test_rouge_matches_brute_force_oracle():
    rng = random.Random(1234)
    vocabulary = "abcde"
    for _ in range(1000):
        a = tuple(rng.choice(vocabulary) for _ in range(rng.randint(0, 12)))
        b = tuple(rng.choice(vocabulary) for _ in range(rng.randint(0, 12)))
        common = _brute_lcs(a, b)
        expected = 0.0 if common == 0 else 2 * common / (len(a) + len(b))
        assert lcs_length(a, b) == common
        assert rouge_l_tokens(a, b) == pytest.approx(expected, abs=1e-9)


def test_rouge_report():
    report = rouge_report([("p1", "the cat sat", "the cat sat"), ("p2", "dog", "cat")])
    assert report.mean_f_score == 0.5
    assert [pair.id for pair in report.pairs] == ["p1", "p2"]
    with pytest.raises(EmptyInput):
        rouge_report([])


# Consistency


def test_consistency_population_and_sample():
    rounds = [{"E": e, "N": 4.0} for e in (2, 2, 2, 2, 7)]
    report = consistency(rounds, "16P")
    assert report.per_dimension_std == {"E": 2.0, "N": 0.0}
    assert report.average_std == pytest.approx(1.0, abs=1e-12)

    sample = consistency(rounds, "16P", sample=True)
    assert sample.per_dimension_std["E"] == pytest.approx(math.sqrt(5), abs=1e-12)
    assert sample.sample


def test_consistency_matches_two_pass_oracle():
    rng = random.Random(7)
    for _ in range(50):
        rounds = [{code: rng.uniform(1, 7) for code in "OCEAN"} for _ in range(5)]
        report = consistency(rounds)
        for code in "OCEAN":
            values = [r[code] for r in rounds]
            mean = sum(values) / 5
            expected = math.sqrt(sum((v - mean) ** 2 for v in values) / 5)
            assert report.per_dimension_std[code] == pytest.approx(expected, abs=1e-12)


def test_identical_rounds_are_perfectly_consistent():
    report = consistency([{"E": 3.0, "A": 5.0}] * 5)
    assert report.average_std == 0.0


def test_consistency_errors():
    with pytest.raises(RoundCountMismatch):
        consistency([{"E": 1.0}] * 4)
    with pytest.raises(KeySetMismatch, match="Round 3"):
        consistency([{"E": 1.0}, {"E": 2.0}, {"A": 1.0}, {"E": 1.0}, {"E": 1.0}])
    with pytest.raises(EmptyInput):
        consistency([{}] * 5)
    with pytest.raises(ValueError):
        ConsistencyReport(scale_id="16P", per_dimension_std={"E": 1.0}, average_std=0.5)


def test_summarize():
    reports = [consistency([{"E": v}] * 5, "16P", character=name) for name, v in (("Tess", 1.0), ("Theo", 2.0))]
    summary = summarize("16P", reports, ["Thor"])
    assert summary.average_std == 0.0
    assert summary.skipped == ("Thor",)
    with pytest.raises(EmptyInput):
        summarize("16P", [])


# Parsers


@pytest.mark.parametrize(
    ("reply", "score"),
    [
        ("Some reasoning.\n6\n", 6),
        ("I considered 3 aspects.\nScore:\n7", 7),
        ("5\nreasoning\n  4  \n", 4),
        ("9\n6", 6),
    ],
)
def test_parse_score(reply, score):
    assert parse_score(reply) == score


def test_parse_score_failures():
    with pytest.raises(ScoreParseError):
        parse_score("Score: 6 out of 7")
    with pytest.raises(ScoreParseError):
        parse_score("0\n8")


def test_parse_option_letter():
    assert parse_option_letter("A is tempting, but Answer: C", "ABC") == "C"
    assert parse_option_letter("I pick B because of A", "ABC") == "B"
    assert parse_option_letter("no letter here", "ABC") is None
    assert parse_option_letter("Answer: D", "ABC") is None


def test_parse_ranking():
    reply = "[{‘‘model’’: ‘‘model_b’’, ‘‘reason’’: ‘‘vivid’’, ‘‘rank’’: 1}, {‘‘model’’: ‘‘model_a’’, ‘‘reason’’: ‘‘flat’’, ‘‘rank’’: 2}]"
    assert parse_ranking(reply) == {"model_b": 1, "model_a": 2}
    assert parse_ranking('Sure: [{"model": "model_a", "rank": "1"}]') == {"model_a": 1}
    with pytest.raises(RankParseError):
        parse_ranking("model_a wins")
    with pytest.raises(RankParseError):
        parse_ranking("[{'model': 'model_a'}]")


# Motivation recognition

_SCENARIO = re.compile(r"Scenario (\d+)")


def _items(correct: list[str]) -> list[McqItem]:
    return [
        McqItem.model_validate(
            {
                "id": f"mr-{index}",
                "scenario": f"Scenario {index}: why does the character act?",
                "options": [{"letter": letter, "text": f"Reason {letter}"} for letter in "ABC"],
                "correct": answer,
            }
        )
        for index, answer in enumerate(correct)
    ]


async def test_mcq_perfect_answers():
    items = _items(list("ABCABCABCA"))

    def replier(messages):
        index = int(_SCENARIO.search(prompt_text(messages)).group(1))
        return f"Answer: {items[index].correct}"

    assert await mr_accuracy("subject", items, make_gateway(replier)) == 1.0


async def test_mcq_partial_and_unparsed(caplog):
    report = await run_mcq("subject", _items(["B", "B", "B", "A"]), make_gateway(lambda _: "Answer: B"))
    assert report.accuracy == 0.75
    assert report.n_correct == 3

    prose = await run_mcq("subject", _items(["A", "B"]), make_gateway(lambda _: "It is about love."))
    assert prose.accuracy == 0.0
    assert prose.n_unparsed == 2
    assert "counted incorrect" in caplog.text


async def test_mcq_needs_items():
    with pytest.raises(EmptyInput):
        await run_mcq("subject", [], make_gateway(lambda _: "A"))


def test_load_mcq(write_json):
    items = load_mcq(DATA_DIR / "mcq_sample.json")
    assert len(items) == 6
    assert items[0].rendered_options().splitlines()[0].startswith("A. ")

    bad = [{"id": "x", "scenario": "s", "options": [{"letter": "A", "text": "t"}, {"letter": "B", "text": "u"}], "correct": "C"}]
    with pytest.raises(McqSchemaError):
        load_mcq(write_json("bad.json", bad))
    good = bad[0] | {"correct": "A"}
    with pytest.raises(McqSchemaError, match="duplicate"):
        load_mcq(write_json("dupes.json", [good, good]))


# Win rate

_QUESTION = re.compile(r'"question": "Question (\d+)"')


def _roleplay(count: int) -> list[RolePlayItem]:
    return [
        RolePlayItem(
            id=f"rp-{index:03d}",
            character="Thor",
            question=f"Question {index}",
            reference_answer="REFERENCE",
            candidate_answer="CANDIDATE",
        )
        for index in range(count)
    ]


def _ranking(first: str, second: str) -> str:
    return str(
        [
            {"model": first, "reason": "more in character", "rank": 1},
            {"model": second, "reason": "less in character", "rank": 2},
        ]
    )


def _judge(candidate_wins):
    def replier(messages):
        text = prompt_text(messages)
        index = int(_QUESTION.search(text).group(1))
        candidate = MODEL_A if '{"model": "model_a", "answer": "CANDIDATE"}' in text else MODEL_B
        reference = MODEL_B if candidate == MODEL_A else MODEL_A
        verdict = candidate_wins(index)
        if verdict is None:
            return "Both answers are fine."
        return _ranking(candidate, reference) if verdict else _ranking(reference, candidate)

    return replier


async def test_win_rate_48_of_100():
    items = _roleplay(100)
    report = await run_win_rate(items, make_gateway(_judge(lambda i: i < 48)), roles={"Thor": "God of thunder."}, seed=11)
    assert report.win_rate == 0.48
    assert report.judged == 100
    # slots actually vary with the seed
    assert {v.candidate_slot for v in report.verdicts} == {MODEL_A, MODEL_B}
    assert all(v.candidate_slot == candidate_slot(11, v.item_id) for v in report.verdicts)


async def test_win_rate_reference_always_first():
    assert await win_rate(_roleplay(5), make_gateway(_judge(lambda i: False)), seed=3) == 0.0


async def test_win_rate_excludes_parse_failures(caplog):
    wins = {2, 3, 4, 5}
    report = await run_win_rate(
        _roleplay(10),
        make_gateway(_judge(lambda i: None if i < 2 else i in wins)),
        roles={},
        seed=5,
    )
    assert report.win_rate == 0.5
    assert report.parse_failures == 2
    assert report.judged == 8
    assert "excluded" in caplog.text


async def test_win_rate_all_unreadable():
    with pytest.raises(EmptyInput):
        await run_win_rate(_roleplay(2), make_gateway(lambda _: "no list"), roles={})


def test_candidate_slot_is_seeded():
    assert candidate_slot(1, "rp-001") == candidate_slot(1, "rp-001")
    slots = {candidate_slot(seed, "rp-001") for seed in range(64)}
    assert slots == {MODEL_A, MODEL_B}


# Dimensional scoring

_CRITERIA = {
    "Factual Correctness": "6",
    "Personality": "7",
    "Values": "6",
    "Long-term Acting": "6",
    "Avoiding Hallucination": "7",
}


def _criterion_judge(messages):
    text = prompt_text(messages)
    for heading, score in _CRITERIA.items():
        if f"[Evaluation Criterion]\n{heading} (1-7)" in text:
            return f"Step 1 scored 3 of the facts.\n{score}\n{score}\n"
    raise AssertionError("unknown criterion")


async def test_dimensional_scores(registry):
    seen = []

    def replier(messages):
        seen.append(prompt_text(messages))
        return _criterion_judge(messages)

    score = await dimensional_scores(
        registry.profile("Tess"),
        [("Who are you?", "I am Tess.")],
        make_gateway(replier),
        transcript_ref="dims/Tess",
    )
    assert score.scores() == {"memorization": 6, "personality": 7, "values": 6, "stability": 6, "hallucination": 7}
    assert score.missing == []
    assert len(seen) == 5
    assert all("User: Who are you?\nTess: I am Tess." in prompt for prompt in seen)
    assert all("Tess is a character used in tests." in prompt for prompt in seen)


async def test_unparsed_criterion_is_missing(registry, caplog):
    def replier(messages):
        if "Personality (1-7)" in prompt_text(messages):
            return "Hard to say."
        return _criterion_judge(messages)

    score = await dimensional_scores(registry.profile("Tess"), [("q", "a")], make_gateway(replier))
    assert score.personality is None
    assert score.missing == ["personality"]
    assert "recorded as missing" in caplog.text


def test_average_dimensional():
    scores = [
        DimensionalScore(character="A", memorization=6, personality=None, values=5),
        DimensionalScore(character="B", memorization=4, personality=7, values=None),
    ]
    averages = average_dimensional(scores)
    assert averages["memorization"] == 5.0
    assert averages["personality"] == 7.0
    assert averages["stability"] is None
    with pytest.raises(EmptyInput):
        average_dimensional([])
    with pytest.raises(ValueError):
        DimensionalScore(character="A", values=8)


def test_render_interactions():
    assert render_interactions([("q1", "a1"), ("q2", "a2")], "Thor") == "User: q1\nThor: a1\n\nUser: q2\nThor: a2"


# Role-play items


def test_load_roleplay_items(write_json):
    bank = load_scale_bank(REFERENCE_BANK)
    reference = load_registry(REFERENCE_REGISTRY, bank)
    items = load_roleplay_items(DATA_DIR / "roleplay_sample.json", reference)
    assert len(items) == 8
    assert all(item.candidate_answer is None for item in items)

    stray = [{"id": "x", "character": "Nobody", "question": "q", "reference_answer": "r"}]
    with pytest.raises(SchemaViolation) as exc:
        load_roleplay_items(write_json("stray.json", stray), reference)
    assert exc.value.pointer == "/0/character"


async def test_fill_candidates(registry):
    items = [
        RolePlayItem(id="1", character="Tess", question="Where were you?", reference_answer="r"),
        RolePlayItem(id="2", character="Tess", question="Why?", reference_answer="r", candidate_answer="kept"),
    ]
    calls = []

    def replier(messages):
        calls.append(messages)
        return "By the river."

    filled = await fill_candidates(items, registry, make_gateway(replier), seed=1)
    assert [item.candidate_answer for item in filled] == ["By the river.", "kept"]
    assert len(calls) == 1
    assert calls[0][0]["content"].startswith("I want you to act like Tess")
    assert transcripts_by_character(filled) == {"Tess": [("Where were you?", "By the river."), ("Why?", "kept")]}


# Personality fidelity and consistency

_ASKED = re.compile(r"Question (\d+) probing (\w) on")


def _fidelity_gateway(low: dict[str, set[str]]):
    """Subject answers plainly; the judge agrees except on each character's low dimensions."""

    def replier(messages):
        text = prompt_text(messages)
        if not text.startswith("You are a psychologist"):
            return "That is how I am."
        name = re.search(r"personality of (\w+)", text).group(1)
        number, code = _ASKED.search(text).groups()
        reverse = int(number) > 5
        agree = code not in low.get(name, set())
        score = 6 if agree != reverse else 2
        return f"{score}\n{score}"

    return make_gateway(replier)


async def test_fidelity_perfect(registry, bank):
    tests = [registry.profile("Tess"), registry.profile("Theo")]
    report = await personality_fidelity_run("subject", tests, bank, _fidelity_gateway({}), registry=registry, seed=1)
    assert (report.single_accuracy, report.full_accuracy) == (1.0, 1.0)
    assert report.coverage == 1.0
    assert report.characters == ("Tess", "Theo")
    assert report.failed_interviews == 0


async def test_fidelity_one_mismatch_each(registry, bank):
    tests = [registry.profile("Tess"), registry.profile("Theo")]
    gateway = _fidelity_gateway({"Tess": {"A"}, "Theo": {"E"}})
    report = await personality_fidelity_run("subject", tests, bank, gateway, registry=registry, seed=1)
    assert report.single_accuracy == pytest.approx(0.8)
    assert report.full_accuracy == 0.0


async def test_fidelity_without_ground_truth(registry, bank):
    tests = [registry.profile("Tess"), registry.profile("Theo")]
    with pytest.raises(NoGroundTruthCoverage) as exc:
        await personality_fidelity_run(
            "subject", tests, bank, _fidelity_gateway({}), registry=registry, scales=("BFI",)
        )
    assert exc.value.coverage == {"covered": [], "uncovered": ["Tess", "Theo"], "fraction": 0.0}


def _dialogue_judge(unreadable: str = ""):
    def replier(messages):
        text = prompt_text(messages)
        if "The interview so far:" not in text:
            return "I answer in character."
        if f"personality of {unreadable} " in text:
            return "Cannot tell."
        turns = text.count("Interviewer: ")
        if "Dimension: Mind." in text:
            score = 7 if turns == 5 else 2
        else:
            score = 4
        return f"Settled.\n{score}\n{score}"

    return replier


async def test_consistency_run(registry, bank):
    tests = [registry.profile("Tess"), registry.profile("Theo")]
    summary = await consistency_run("subject", tests, bank.scale("16P"), make_gateway(_dialogue_judge()), seed=3)

    assert [r.character for r in summary.reports] == ["Tess", "Theo"]
    report = summary.reports[0]
    assert report.per_dimension_std == {"A": 0.0, "E": 2.0, "J": 0.0, "N": 0.0, "T": 0.0}
    assert report.average_std == pytest.approx(0.4, abs=1e-12)
    assert summary.average_std == pytest.approx(0.4, abs=1e-12)


async def test_consistency_run_skips_failures(registry, bank):
    tests = [registry.profile("Tess"), registry.profile("Theo")]
    summary = await consistency_run(
        "subject", tests, bank.scale("16P"), make_gateway(_dialogue_judge(unreadable="Theo")), seed=3
    )
    assert summary.skipped == ("Theo",)
    assert len(summary.reports) == 1

    with pytest.raises(EmptyInput):
        await consistency_run("subject", tests, bank.scale("BSRI"), make_gateway(_dialogue_judge()), seed=3)
