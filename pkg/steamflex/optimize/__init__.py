"""Linear programming, dispatch, economics and sizing search."""
