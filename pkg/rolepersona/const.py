"""Constants for the rolepersona pipeline."""

from importlib import resources

PACKAGE = "rolepersona"

DATA_DIR = resources.files(PACKAGE) / "data"
PROMPTS_DIR = resources.files(PACKAGE) / "prompts"

REFERENCE_BANK = DATA_DIR / "reference_bank.json"
REFERENCE_REGISTRY = DATA_DIR / "reference_registry.json"

# Per-item judging scale
JUDGE_LOW = 1
JUDGE_HIGH = 7
JUDGE_MIDPOINT = 4.0

MULTI_TURN_LENGTH = 5
CONSISTENCY_ROUNDS = 5
DEFAULT_MEMORY_K = 3
GENERATION_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0

LEVEL_HIGH = "High"
LEVEL_LOW = "Low"

SUBSET_FULL_SINGLE = "FullSingle"
SUBSET_PART_SINGLE = "PartSingle"
SUBSET_PART_MULTI = "PartMulti"
SUBSETS: tuple[str, ...] = (SUBSET_FULL_SINGLE, SUBSET_PART_SINGLE, SUBSET_PART_MULTI)

# Published subset sizes, kept as metadata only
REFERENCE_SUBSET_COUNTS = {
    SUBSET_FULL_SINGLE: {"questions": 1092, "turns": 1, "samples": 32089},
    SUBSET_PART_SINGLE: {"questions": 646, "turns": 1, "samples": 22489},
    SUBSET_PART_MULTI: {"questions": 646, "turns": 5, "samples": 32767},
}

QUADRANT_LABELS = {
    "HL": "Masculine",
    "LH": "Feminine",
    "HH": "Androgynous",
    "LL": "Undifferentiated",
}

DIMENSIONAL_CRITERIA: tuple[str, ...] = (
    "memorization",
    "personality",
    "values",
    "stability",
    "hallucination",
)

EVAL_METRICS: tuple[str, ...] = ("pf", "mr", "rouge", "winrate", "dims", "consistency")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_PARTIAL_FAILURE = 3
EXIT_HARD_FAILURE = 4
