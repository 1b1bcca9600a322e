"""Constants for the OpenAI-compatible chat-completions client."""

BASE_URL = "https://api.openai.com/v1"
CHAT_COMPLETIONS_PATH = "/chat/completions"

# Placeholder host used when the client runs against a scripted transport
MOCK_BASE_URL = "http://mock.invalid/v1"

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
USER_AGENT = "rolepersona/0.1.0"

DEFAULT_HEADERS = {
    "Accept": "application/json",
    "Content-Type": "application/json",
    "User-Agent": USER_AGENT,
}

DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRY_BUDGET = 4
DEFAULT_BACKOFF_BASE = 1.0
DEFAULT_CONCURRENCY = 4
DEFAULT_MAX_TOKENS = 512

# Status codes worth another attempt; everything else >= 400 fails fast
RETRYABLE_STATUS: tuple[int, ...] = (429, 500, 502, 503, 504)

MODEL_ALIASES: tuple[str, ...] = ("generator", "judge", "subject")
