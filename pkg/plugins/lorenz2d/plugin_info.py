from typing import override
from plugin_abstract.plugin_info import RecLabPlugin
from plugins.lorenz2d.system import Lorenz2DMap


class Lorenz2DPlugin(RecLabPlugin):
    """
    Plugin for the two-dimensional geometric Lorenz return map.
    """
    @staticmethod
    @override
    def create_system(params: dict) -> Lorenz2DMap:
        """
        Creates a new instance of the Lorenz2DMap class.

        :param params: The resolved parameter record, i.e. {"alpha": 0.7, "b": 1.8, "lam": 0.3, "c": 0.6}.
        :returns: A new instance of the Lorenz2DMap class.
        """
        return Lorenz2DMap(params)
