import logging
import sys

# Log records go to the real stderr so they never interleave with tables on stdout.
logging.basicConfig(stream=sys.__stderr__, level=logging.WARNING)

__version__ = "0.1.0"

logging.getLogger("PIL").setLevel(logging.ERROR)
