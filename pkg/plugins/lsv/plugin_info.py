from typing import override
from plugin_abstract.plugin_info import RecLabPlugin
from plugins.lsv.system import LsvMap


class LsvPlugin(RecLabPlugin):
    """
    Plugin for the Liverani-Saussol-Vaienti intermittent map.
    """
    @staticmethod
    @override
    def create_system(params: dict) -> LsvMap:
        """
        Creates a new instance of the LsvMap class.

        :param params: The resolved parameter record, i.e. {"alpha": 0.5}.
        :returns: A new instance of the LsvMap class.
        """
        return LsvMap(params)
