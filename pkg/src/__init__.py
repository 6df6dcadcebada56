# -*- coding: utf-8 -*-
"""StyleSync 风格同步仿真评测系统"""

__app_name__ = "stylesync"
__version__ = "0.1.0"
