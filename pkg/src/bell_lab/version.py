"""Version information for bell-lab."""

__version__ = "0.4.0"
__version_info__ = tuple(int(part) for part in __version__.split('.'))

# Bumped whenever a report or config field changes meaning.
REPORT_SCHEMA_VERSION = "1.0"
CONFIG_SCHEMA_VERSION = "1.0"
