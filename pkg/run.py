#!/usr/bin/env python3
"""
启动脚本
nFP 拓扑优化命令行入口，参数同 python -m nfptopo
"""

import os
import sys

# 添加项目根目录到 Python 路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from nfptopo.main import main


if __name__ == "__main__":
    sys.exit(main())
