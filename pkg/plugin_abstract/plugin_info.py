import os
import json
import inspect

from abc import ABC, abstractmethod

from errors import ConfigError, PluginInfoError
from plugin_abstract.base_system import BaseSystem


class RecLabPlugin(ABC):
    """
    Abstract base class for reclab system plugins.

    A plugin is a package that ships a plugin_info.json next to the module defining its
    RecLabPlugin subclass, and that instantiates the subclass as PLUGIN_INFO.
    """
    REQUIRED_KEYS = ("name", "author", "version", "identifier", "system", "dimension", "parameters")
    DIMENSIONS = (1, 2)

    def __init__(self):
        self.__info = {}
        self.__verified = False
        self.__readme_markdown = ""
        self.__load_plugin_info()
        self.__verify()

    def __load_plugin_info(self):
        """
        Loads the plugin info from the plugin_info.json file. Also loads the README.md file if it exists.
        """
        plugin_module = inspect.getmodule(self).__file__
        plugin_dir = os.path.dirname(os.path.abspath(plugin_module))
        plugin_info_path = os.path.join(plugin_dir, "plugin_info.json")
        with open(plugin_info_path, "r") as f:
            self.__info = json.load(f)
        readme_path = os.path.join(plugin_dir, "README.md")
        if os.path.isfile(readme_path):
            with open(readme_path, "r") as f:
                self.__readme_markdown = f.read()

    def __verify(self):
        """
        Verifies the plugin.
        """
        for key in self.REQUIRED_KEYS:
            if key not in self.__info:
                raise PluginInfoError(f"The plugin info must contain a {key.replace('_', ' ')}.")
        if self.__info["dimension"] not in self.DIMENSIONS:
            raise PluginInfoError("The plugin info must contain a dimension of 1 or 2.")
        if not isinstance(self.__info["parameters"], dict):
            raise PluginInfoError("The plugin parameters must be a record of default values.")
        self.__verified = True

    @property
    def name(self) -> str:
        """
        The display name of the system.
        """
        if not self.__verified:
            return ""
        return self.__info["name"]

    @property
    def description(self) -> str:
        if not self.__verified:
            return ""
        return self.__info.get("description", "")

    @property
    def author(self) -> str:
        if not self.__verified:
            return ""
        return self.__info["author"]

    @property
    def version(self) -> str:
        if not self.__verified:
            return ""
        return self.__info["version"]

    @property
    def identifier(self) -> str:
        """
        The identifier of the plugin, i.e. org.reclab.doubling
        """
        if not self.__verified:
            return ""
        return self.__info["identifier"]

    @property
    def system(self) -> str:
        """
        The short name experiment configs use to select this system.
        """
        if not self.__verified:
            return ""
        return self.__info["system"]

    @property
    def dimension(self) -> int:
        if not self.__verified:
            return 0
        return self.__info["dimension"]

    @property
    def parameters(self) -> dict:
        """
        The default parameter record of the system.
        """
        if not self.__verified:
            return {}
        return dict(self.__info["parameters"])

    @property
    def readme(self) -> str:
        if not self.__verified:
            return ""
        return self.__readme_markdown

    @property
    def verified(self) -> bool:
        return self.__verified

    def resolve_parameters(self, params: dict | None) -> dict:
        """
        Fills a parameter record with the plugin defaults.

        :param params: The parameters given in an experiment config, possibly None.
        :returns: The complete parameter record.
        :raises ConfigError: If params names a parameter the system does not have.
        """
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.parameters))
        if unknown:
            raise ConfigError(f"Unknown parameters for system '{self.system}': {', '.join(unknown)}")
        return self.parameters | params

    def create(self, params: dict | None = None) -> BaseSystem:
        """
        Resolves params against the defaults and builds the system.
        """
        return self.create_system(self.resolve_parameters(params))

    @staticmethod
    @abstractmethod
    def create_system(params: dict) -> BaseSystem:
        """
        Creates a new instance of your BaseSystem subclass from a complete parameter record.
        """
        pass
