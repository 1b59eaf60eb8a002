"""Report builders behind the CLI subcommands"""
