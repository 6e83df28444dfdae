# Keep these aligned with ProfilerConfig defaults in config.py

MICROS_PER_SECOND = 1_000_000

DEFAULT_QUANTUM = 0.01            # seconds between CPU timer notifications
DEFAULT_SWITCH_INTERVAL = 0.005   # green-thread quantum
DEFAULT_OP_COST = 0.00001         # 10 µs per bytecode opcode
DEFAULT_MAX_TIME = 600.0          # runaway guard, virtual seconds

# Smallest prime above 2**20
DEFAULT_ALLOC_THRESHOLD = 1_048_583
CALLSTACK_DIVISOR = 13
COPY_MULTIPLIER = 2
MAX_STACK_DEPTH = 4

SIZE_CLASS_STEP = 16
MAX_SMALL_SIZE = 512
SLAB_SIZE = 4096
PAGE_SIZE = 4096
HEADER_MAGIC = 0xDEADBEEF
DEFAULT_ARENA_BYTES = 64 * 1024 * 1024

# Frames whose function name starts with one of these belong to the interpreter
INTERPRETER_PREFIXES = ("Vm_", "_Vm")
# ...except these, which allocate on behalf of native code
NATIVE_OVERRIDES = ("_VmCFunction", "VmArray")

SPARKLINE_CAPACITY = 27
SPARKLINE_GLYPHS = "▁▂▃▄▅▆▇█"
TREND_WIDTH = 27

CHANNEL_PREFIX = "miniprof"
# decimal places a record's python fraction keeps on the wire
FRACTION_DIGITS = 6

# Simulation study defaults
SIM_LINES = 100
SIM_ALPHA = 1.16
SIM_RUNS = 10
SIM_MAX_TIME = 64.0

MIB = 1024 * 1024
MB = 1_000_000
