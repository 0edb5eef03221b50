"""SPARQL algebra, rewriting, chase-based optimization and termination analysis."""
