import sys

from fixeval_runner import serve_once

if __name__ == "__main__":
    sys.exit(serve_once())
