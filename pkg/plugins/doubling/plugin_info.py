from typing import override
from plugin_abstract.plugin_info import RecLabPlugin
from plugins.doubling.system import DoublingMap


class DoublingPlugin(RecLabPlugin):
    """
    Plugin for the circle doubling map.
    """
    @staticmethod
    @override
    def create_system(params: dict) -> DoublingMap:
        """
        Creates a new instance of the DoublingMap class.

        :param params: The resolved parameter record (the doubling map has no parameters).
        :returns: A new instance of the DoublingMap class.
        """
        return DoublingMap(params)
