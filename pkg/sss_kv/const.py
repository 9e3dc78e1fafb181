"""Constants for the SSS transactional key-value store."""

PROTOCOL_SSS = "sss"
PROTOCOL_BASELINE = "2pc-baseline"
PROTOCOLS = (PROTOCOL_SSS, PROTOCOL_BASELINE)

# Simulated time
TICKS_PER_UNIT = 1000  # one unit maps to one network hop of the reference cluster
LOOPBACK_LATENCY = 1  # ticks, sender == destination
DEFAULT_LATENCY = 0.1  # units, fixed-latency default

LATENCY_FIXED = "fixed"
LATENCY_UNIFORM = "uniform"
LATENCY_LOGNORMAL = "lognormal"
LATENCY_MODELS = (LATENCY_FIXED, LATENCY_UNIFORM, LATENCY_LOGNORMAL)

# Message priority classes, lower is delivered first at equal timestamps
PRIORITY_REMOVE = 0
PRIORITY_COMMIT = 1  # Decide, Ack
PRIORITY_VOTE = 2  # Prepare, Vote
PRIORITY_READ = 3  # ReadRequest, ReadReturn
PRIORITY_LOCAL = 4  # timers and task wakeups

# Livelock detector
LIVELOCK_EVENT_WINDOW = 10**6  # events without a reply or abort

# Node settings
LOCK_TIMEOUT = 5  # units
STARVATION_THRESHOLD = 100  # units a writer may sit in a snapshot-queue
BACKOFF_INITIAL = 1  # units
BACKOFF_MAX = 64  # units
HISTORY_LIMIT = None  # versions kept per key, None keeps everything

# Coordinator settings
REQUEST_TIMEOUT = 50  # units, reads
VOTE_TIMEOUT = 50  # units, prepare round
RETRY_BACKOFF_MIN = 1  # units
RETRY_BACKOFF_MAX = 10  # units

# Placement
DEFAULT_REPLICATION_DEGREE = 2
DEFAULT_PLACEMENT_SEED = 0

# Workload presets
DEFAULT_NUM_NODES = 4
DEFAULT_NUM_KEYS = 200
KEY_PRESETS = (5000, 10000)
READ_ONLY_PRESETS = (20, 50, 80)
DEFAULT_READ_ONLY_PCT = 50
DEFAULT_RO_TXN_LEN = (2, 2)
MAX_RO_TXN_LEN = 16
UPDATE_TXN_KEYS = 2  # keys read and written by an update transaction
DEFAULT_CLIENTS_PER_NODE = 10
DEFAULT_DURATION = 1000  # committed transactions
KEY_DIST_UNIFORM = "uniform"
KEY_DIST_LOCAL_MIX = "local_mix"

# Checker
BRUTE_FORCE_LIMIT = 8  # committed transactions

# Debug options
LOG_MESSAGES = False  # Set to True to log every delivered message
LOG_QUEUE_CHANGES = False  # Set to True to log snapshot-queue inserts and removals
