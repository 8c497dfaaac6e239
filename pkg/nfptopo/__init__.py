"""
nfptopo
归一化场乘积（nFP）密度拓扑优化：刚度结构与柔顺机构
"""

__version__ = "0.1.0"
