"""Numerical core: geometry, jets, Whitney cubes, lacunae, graphs, metrics, extension and seminorms"""
