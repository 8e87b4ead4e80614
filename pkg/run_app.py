#!/usr/bin/env python3
"""
Lite HetNet 启动脚本
"""

import os
import sys

# 确保在项目根目录
script_dir = os.path.dirname(os.path.abspath(__file__))
if script_dir not in sys.path:
    sys.path.insert(0, script_dir)

from backend.litehetnet.cli import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 已中断")
        sys.exit(130)
