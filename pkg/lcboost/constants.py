"""
Centralized constants for the lcboost engine, baselines and harness.

Defaults that were otherwise scattered across the engine, the gateway and the
CLI live here. Import from here to keep config.yaml, the CLI and the tests
consistent.
"""

# Working window (local tokens). The engine is limited to a 4K window.
DEFAULT_WINDOW = 4096

# How the window is split between chunk text, accumulated evidence, and the
# template/query/output reserve.
DEFAULT_CHUNK_BUDGET = 2048
DEFAULT_EVIDENCE_BUDGET = 1024
DEFAULT_PROMPT_RESERVE = 1024

# Output allowance per call and the longest query kept verbatim
DEFAULT_MAX_OUTPUT_TOKENS = 256
DEFAULT_QUERY_BUDGET = 256

# Retrieval
DEFAULT_TOP_K = 3
BM25_K1 = 1.5
BM25_B = 0.75

# Gateway
DEFAULT_TEMPERATURE = 0.0
TRANSPORT_MAX_ATTEMPTS = 3
TRANSPORT_BACKOFF_SECONDS = 1.0
REMOTE_TIMEOUT_SECONDS = 60
DEFAULT_API_KEY_ENV = 'OPENAI_API_KEY'
DEFAULT_BASE_URL = 'https://api.openai.com/v1'
DEFAULT_REMOTE_MODEL = 'gpt-3.5-turbo'

# Published GPT-3.5-turbo pricing, USD per 1M tokens (input, output)
DEFAULT_COST_PER_1M_INPUT = '0.50'
DEFAULT_COST_PER_1M_OUTPUT = '1.50'

# Local-to-backend token calibration for cost reports
DEFAULT_TOKEN_CALIBRATION = 1.0

# Prompt parsing
MAX_KEY_SENTENCES = 10
PLAN_OPTIONS = (1, 2, 3, 4)

# Energy model: 7B dense profile on an A100 (BF16 peak, TDP)
MODEL_PARAMS_7B = 6.74e9
MODEL_HIDDEN_7B = 4096
MODEL_LAYERS_7B = 32
HW_PEAK_FLOPS = 312e12
HW_POWER_WATTS = 400.0

# Energy sweep defaults (doc lengths in tokens)
SWEEP_MIN_TOKENS = 4096
SWEEP_MAX_TOKENS = 131072

# Task categories
CATEGORY_QA = 'qa'
CATEGORY_SUMMARIZATION = 'summarization'
CATEGORY_FEWSHOT = 'fewshot'
CATEGORY_SYNTHETIC = 'synthetic'
CATEGORY_CODE = 'code'

TASK_CATEGORIES = (
    CATEGORY_QA,
    CATEGORY_SUMMARIZATION,
    CATEGORY_FEWSHOT,
    CATEGORY_SYNTHETIC,
    CATEGORY_CODE,
)

# Strategy executed by the harness when none is given
STRATEGY_LCBOOST = 'lcboost'


def fallback_option(has_query: bool) -> int:
    """
    Plan option used when the Task Understanding reply cannot be parsed.

    Args:
        has_query: Whether the task carries an input query

    Returns:
        1 (retrieve) for query-bearing tasks, 2 (merge/aggregate) otherwise

    Examples:
        >>> fallback_option(True)
        1
        >>> fallback_option(False)
        2
    """
    return 1 if has_query else 2
