from configparser import ConfigParser
from fractions import Fraction
from typing import Any, Dict, Optional, Union

__all__ = [
    'initialize',
    'read',
    'read_int',
    'read_rational'
]

_config = None


def initialize(config_dir: str, environment: str):
    """
    Load {config_dir}/{environment}.config as the active workbench configuration.

    Parameters
    ----------
    config_dir : str
        Directory holding the .config files, normally f"{QPLANE_RESOURCE_DIR}/config".
    environment : str
        Environment name; 'default' ships with the repository, template.config lists every key.

    Raises
    ------
    FileNotFoundError if the file does not exist. The previous configuration is discarded either way.

    Example
    -------
    import _QPLANE.resource.config as cfg

    cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", 'default')
    workers = cfg.read_int('workers', 'checks')
    """
    global _config

    config_file = f"{config_dir}/{environment}.config"
    _config = ConfigParser(inline_comment_prefixes=(';',))
    if not _config.read(config_file):
        _config = None
        raise FileNotFoundError(f"No configuration file at {config_file}.")


def read(section: str, option: Optional[str] = None) -> Union[Dict, Any]:
    """
    Parameters
    ----------
    section : str
        Config section, e.g. 'logging'.
    option : str, default None
        Option within the section; omit it to get the whole section.

    Returns
    -------
    The option's raw string, or a dict of every option in the section.

    Raises
    ------
    AssertionError if initialize has not loaded a file.
    """
    assert _config, "Config file initialization required before reading."

    if option:
        return _config.get(section, option)
    return dict(_config.items(section))


def read_int(section: str, option: str) -> int:
    return int(read(section, option))


def read_rational(section: str, option: str) -> Fraction:
    """Read an option such as '1' or '2/3' as an exact rational."""
    return Fraction(read(section, option).strip())
