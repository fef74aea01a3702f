from .plugin_info import Lorenz2DPlugin
from .system import *

# Must instantiate your plugin's RecLabPlugin class as PLUGIN_INFO
PLUGIN_INFO = Lorenz2DPlugin()
