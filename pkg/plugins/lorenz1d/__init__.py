from .plugin_info import Lorenz1DPlugin
from .system import *

# Must instantiate your plugin's RecLabPlugin class as PLUGIN_INFO
PLUGIN_INFO = Lorenz1DPlugin()
