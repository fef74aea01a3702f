from typing import override
from plugin_abstract.plugin_info import RecLabPlugin
from plugins.lorenz1d.system import Lorenz1DMap


class Lorenz1DPlugin(RecLabPlugin):
    """
    Plugin for the one-dimensional geometric Lorenz map.
    """
    @staticmethod
    @override
    def create_system(params: dict) -> Lorenz1DMap:
        """
        Creates a new instance of the Lorenz1DMap class.

        :param params: The resolved parameter record, i.e. {"alpha": 0.7, "b": 1.8}.
        :returns: A new instance of the Lorenz1DMap class.
        """
        return Lorenz1DMap(params)
