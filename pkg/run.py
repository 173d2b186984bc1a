#!/usr/bin/env python3
"""
BrainZ-BP - Production Entry Point

Runs the full pipeline on a synthetic cohort, or hands any arguments to the CLI.
"""

import sys
from pathlib import Path

# Add the current directory to Python path for imports
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))


def main():
    """Main entry point for BrainZ-BP."""
    from brainz_bp import __version__

    print(f"🚀 BrainZ-BP v{__version__}")
    print("=" * 50)

    try:
        from brainz_bp.cli import main as cli_main
        argv = sys.argv[1:] or ["pipeline"]
        return cli_main(argv)

    except ImportError as e:
        print(f"❌ Import error: {e}")
        print("💡 Make sure all dependencies are installed: pip install -r requirements.txt")
        return 1


if __name__ == "__main__":
    sys.exit(main())
