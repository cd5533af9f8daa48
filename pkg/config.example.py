# Create a config.py to change local defaults
# This is a example file as config.py is included in .gitignore

# Where run, sweep and validate write their files when --out is not given.
# The PIC_OUTPUT_DIR environment variable is used when config.py does not set it.
OUTPUT_DIR = "results"

# Root log level for the command line tool
LOG_LEVEL = "INFO"

# Default for --max-workers (trials run in parallel threads)
MAX_WORKERS = 1
