"""Send one chat message through the gateway and print the reply."""

from __future__ import annotations

import argparse
import asyncio
import logging
import os

from dotenv import load_dotenv

from rolepersona.pyllm import (
    BASE_URL,
    DEFAULT_API_KEY_ENV,
    LLMGatewayClient,
    LLMGatewayError,
    ResponseCache,
    ScriptedTransport,
)
from rolepersona.pyllm.const import MOCK_BASE_URL


async def _run(args: argparse.Namespace) -> int:
    cache = ResponseCache(args.cache_dir) if args.cache_dir else None
    if args.mock_script:
        client = LLMGatewayClient(
            MOCK_BASE_URL, transport=ScriptedTransport.from_file(args.mock_script), cache=cache
        )
    else:
        client = LLMGatewayClient(args.endpoint, os.environ.get(args.api_key_env), cache=cache)

    try:
        response = await client.complete(
            args.model,
            [{"role": "user", "content": args.message}],
            temperature=args.temperature,
            seed=args.seed,
        )
    except LLMGatewayError as exc:
        print(f"Request failed: {exc}")
        return 1
    finally:
        await client.close()

    print(response.content)
    print(f"-- model={client.resolve_model(args.model)} finish={response.finish_reason} cached={response.cached}")
    return 0


def main() -> int:
    load_dotenv()
    parser = argparse.ArgumentParser(description="One-shot chat against an endpoint or a mock script.")
    parser.add_argument("message", help="User message to send")
    parser.add_argument("--model", default="gpt-3.5-turbo", help="Model name")
    parser.add_argument("--endpoint", default=BASE_URL, help="OpenAI-compatible base URL")
    parser.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV, help="Variable holding the API key")
    parser.add_argument("--mock-script", help="Answer from this mock script instead of the network")
    parser.add_argument("--cache-dir", help="Response cache directory")
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--debug", action="store_true", help="Log request and response bodies")
    args = parser.parse_args()
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.WARNING)
    return asyncio.run(_run(args))


if __name__ == "__main__":
    raise SystemExit(main())
