"""
COVID-19 chest CT classification package
"""

__version__ = "1.0.0"
