"""CTCB module."""
import importlib.metadata as __metadata__

_pkg_metadata = __metadata__.metadata(__package__).json
project_urls = {}
for item in _pkg_metadata.get("project_url", []):
    key, value = item.split(", ")
    project_urls[key] = value


# data from pyproject.toml
__version__ = _pkg_metadata["version"] # version field
__version_str__ = str(__version__)
__summary__ = _pkg_metadata["summary"] # description field
__homepage_url__ = _pkg_metadata.get("home_page") # homepage field
__documentation_url__ = project_urls.get("Documentation") # documentation field
__repository_url__ = project_urls.get("Repository") # repository field


__all__ = [
    "config",
    "constants",
    "domain",
    "errors",
    "market_data",
    "dsge",
    "model",
    "ir_pricing",
    "inflation_pricing",
    "monte_carlo",
    "calibration",
    "moment_matching",
    "scenarios",
    "cli",
    "setup",
]
