from .plugin_info import LsvPlugin
from .system import *

# Must instantiate your plugin's RecLabPlugin class as PLUGIN_INFO
PLUGIN_INFO = LsvPlugin()
