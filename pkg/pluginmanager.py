import os
import sys
import json
import logging
import pkgutil
import importlib
import platformdirs

from app_info import APP_NAME, AUTHOR
from errors import ConfigError, PluginInfoError
from plugin_abstract.plugin_info import RecLabPlugin
from plugin_abstract.base_system import BaseSystem

logger = logging.getLogger(__name__)

BUILTIN_PLUGINS_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "plugins")
REQUIRED_INFO_KEYS = RecLabPlugin.REQUIRED_KEYS

_builtin_only = False


def use_builtin_plugins_only(enabled: bool = True):
    """
    Restricts plugin discovery to the plugins shipped in this repository.
    """
    global _builtin_only
    _builtin_only = enabled


def user_plugins_path() -> str:
    return str(os.path.join(platformdirs.user_data_path(APP_NAME, AUTHOR), "plugins"))


def _discover_plugins() -> dict:
    """
    Imports every plugin package and returns them by module name.
    """
    discovered = {}
    for _, name, is_package in pkgutil.iter_modules(path=[BUILTIN_PLUGINS_PATH]):
        if is_package:
            discovered[f"plugins.{name}"] = importlib.import_module(f"plugins.{name}")

    plugins_path = user_plugins_path()
    if not _builtin_only and os.path.exists(plugins_path):
        if plugins_path not in sys.path:
            sys.path.append(plugins_path)
        for _, name, is_package in pkgutil.iter_modules(path=[plugins_path]):
            if not is_package:
                continue
            try:
                discovered[name] = importlib.import_module(name)
            except (ImportError, PluginInfoError) as e:
                logger.warning("Plugin %s could not be loaded: %s", name, e)
    return discovered


def get_plugin(system: str, plugin_version: str = None) -> (tuple[RecLabPlugin, str]
                                                           | tuple[None, str] | tuple[None, None]):
    """
    Gets a plugin from its system name.

    :param system: The short system name, i.e. "doubling".
    :param plugin_version: The version of the plugin.
    :returns: The plugin and the newest available version.
    """
    discovered_plugins = _discover_plugins()

    # Sort the plugins by version
    sorted_plugins = []
    for plugin in discovered_plugins:
        if not hasattr(discovered_plugins[plugin], "PLUGIN_INFO"):
            continue
        version = [int(part) for part in discovered_plugins[plugin].PLUGIN_INFO.version.split(".")]
        sorted_plugins.append((plugin, version))
    sorted_plugins.sort(key=lambda x: x[1], reverse=True)

    # Find the plugin
    newest = None
    for plugin in sorted_plugins:
        module = discovered_plugins[plugin[0]]
        if module.PLUGIN_INFO.system == system:
            if newest is None:
                newest = module
            if plugin_version is None or module.PLUGIN_INFO.version == plugin_version:
                return module.PLUGIN_INFO, newest.PLUGIN_INFO.version
    if newest is not None:
        # If the requested version was not found, return the newest version
        return None, newest.PLUGIN_INFO.version
    return None, None


def create_system(system: str, params: dict | None = None, plugin_version: str = None) -> BaseSystem:
    """
    Builds a base system from its config name and parameter record.

    :raises ConfigError: If no plugin provides the system or params are invalid.
    """
    plugin, newest = get_plugin(system, plugin_version)
    if plugin is None:
        if newest is not None:
            raise ConfigError(f"System '{system}' has no plugin version {plugin_version} (newest is {newest}).")
        raise ConfigError(f"Unknown system '{system}'. Run 'reclab list-systems' to see the available systems.")
    return plugin.create(params)


def get_plugins_info() -> list[dict]:
    """
    Gets info of all plugins from their plugin_info.json file.
    """
    def verify_plugin_info(info: dict):
        for key in REQUIRED_INFO_KEYS:
            if key not in info:
                raise PluginInfoError(f"The plugin info must contain a {key}.")

    plugin_dirs = [BUILTIN_PLUGINS_PATH]
    if not _builtin_only:
        plugin_dirs.append(user_plugins_path())

    plugins_info = []
    for plugins_path in plugin_dirs:
        # Check if the plugins directory exists
        if not os.path.exists(plugins_path):
            continue
        for plugin in sorted(os.listdir(plugins_path)):
            plugin_info_path = os.path.join(plugins_path, plugin, "plugin_info.json")
            if not os.path.exists(plugin_info_path):
                continue
            with open(plugin_info_path, "r") as f:
                plugin_info = json.load(f)
            plugin_info["dir"] = os.path.join(plugins_path, plugin)
            try:
                verify_plugin_info(plugin_info)
                plugin_info["readme"] = ""
                readme_path = os.path.join(plugins_path, plugin, "README.md")
                if os.path.exists(readme_path):
                    with open(readme_path, "r") as f_readme:
                        plugin_info["readme"] = f_readme.read()
                plugins_info.append(plugin_info)
            except PluginInfoError as e:
                logger.warning("Plugin %s is invalid: %s", plugin, e)
    return plugins_info
