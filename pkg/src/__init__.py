"""
SuperMAN: interpretable additive models over sets of temporal signal graphs,
with a command line and an MCP server on top.
"""
