"""Instruction-to-plan gateway: prompts, answer parsing, transports and fixtures."""

from prefplan.llm.fixtures import Fixture, FixtureCollision, FixtureError, FixtureStore, MissingFixture
from prefplan.llm.gateway import RETRIES, GatewayError, request_candidates, request_plan, softmax, validate
from prefplan.llm.prompt import (
    BUILDING_BLOCKS,
    Example,
    PromptBundle,
    PromptError,
    build_candidate_prompt,
    build_prompt,
    canonical,
    check_preferences,
    describe_state,
    format_return,
    prompt_hash,
    select_examples,
)
from prefplan.llm.response import PlanResponse, ResponseError, blocks, parse_response
from prefplan.llm.transport import (
    Completion,
    LiveTransport,
    RecordingTransport,
    ReplayTransport,
    TransportError,
    line_logprobs,
)
