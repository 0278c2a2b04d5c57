# src/simplex_lab/__main__.py
"""Allow running as: python -m simplex_lab"""

from simplex_lab.cli import main

if __name__ == "__main__":
    main()
