"""Command line entry points: serve (default), seed, replay."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import Config
from .service import Platform

DEFAULT_CORPUS = os.path.join(os.path.dirname(__file__), "data", "spam_seed.tsv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hikester",
                                     description="Event management platform service")
    parser.add_argument("--config", help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("serve", help="run the API server (default)")

    seed = sub.add_parser("seed", help="load the spam corpus and demo events")
    seed.add_argument("--corpus", default=DEFAULT_CORPUS,
                      help="label<TAB>text corpus file")
    seed.add_argument("--no-demo", action="store_true",
                      help="skip creating demo users and events")

    replay = sub.add_parser("replay", help="rebuild indexes from a change log")
    replay.add_argument("--log", required=True, help="path to a store.log file")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    config = Config.load(args.config)
    command = args.command or "serve"

    if command == "serve":
        import uvicorn
        from .api import create_app
        platform = Platform(config)
        try:
            uvicorn.run(create_app(platform), host=config.host, port=config.port,
                        log_level="info")
        finally:
            platform.close()
        return 0

    if command == "seed":
        platform = Platform(config)
        try:
            n = platform.seed_spam_corpus(args.corpus)
            print(f"trained spam filter on {n} labeled texts")
            if not args.no_demo:
                created = platform.seed_demo()
                print(f"created {created} demo documents")
            platform.wait_idle()
        finally:
            platform.close()
        return 0

    if command == "replay":
        log_dir = os.path.dirname(os.path.abspath(args.log))
        if os.path.basename(args.log) != "store.log":
            print("expected a path to a store.log file", file=sys.stderr)
            return 2
        config.data_dir = log_dir
        platform = Platform(config)
        try:
            print(f"revision:       {platform.store.current_revision()}")
            print(f"events indexed: {len(platform.search)}")
            print(f"geo entries:    {len(platform.geo)}")
            print(f"profiles:       {len(platform.recommender.profiles)}")
            print(f"history tuples: {len(platform.optimizer.tuples)}")
        finally:
            platform.close()
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
