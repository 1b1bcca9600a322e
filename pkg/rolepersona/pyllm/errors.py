"""Custom exceptions for the chat-completions gateway."""


class LLMGatewayError(Exception):
    """Base error raised for gateway failures."""


class InvalidRequest(LLMGatewayError):
    """Raised when a chat request violates its own invariants."""


class GatewayTimeout(LLMGatewayError):
    """Raised when every attempt for a request timed out."""


class RateLimited(LLMGatewayError):
    """Raised when the endpoint keeps answering 429 past the retry budget."""


class EndpointError(LLMGatewayError):
    """Raised on a non-2xx answer that is not worth retrying."""

    def __init__(self, status_code: int, body: str) -> None:
        super().__init__(f"API error {status_code}: {body}")
        self.status_code = status_code
        self.body = body


class MockScriptExhausted(LLMGatewayError):
    """Raised when the scripted backend has no response for a request."""

    def __init__(self, digest: str) -> None:
        super().__init__(f"No scripted response matches request {digest}")
        self.digest = digest
