from .plugin_info import DoublingPlugin
from .system import *

# Must instantiate your plugin's RecLabPlugin class as PLUGIN_INFO
PLUGIN_INFO = DoublingPlugin()
