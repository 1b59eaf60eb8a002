"""
Sobolev Jets
Whitney-type extension of polynomial jets on finite sets, with trace seminorms and metric transforms
"""

__version__ = "0.1.0"
