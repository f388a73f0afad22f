"""Command line entry point: ``flowaudit audit --repo DIR ...``.

Exit status is 0 whenever the audit completes, whatever it finds.  Nonzero
codes mean the run itself failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .audit import FORMATS, AuditConfig, execute
from .errors import (
    BackendUnreachable,
    ConfigInvalid,
    FlowAuditError,
    MockResponseMissing,
    RootNotFound,
    UnwritableOutput,
)
from .report import emit_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ROOT = 3
EXIT_BACKEND = 4
EXIT_OUTPUT = 5
EXIT_INTERNAL = 6

# flag dest -> AuditConfig field, for flags that map one to one
_FIELDS = {
    "repo": "repo_root",
    "bug_type": "bug_types",
    "max_depth": "max_depth",
    "mock_dir": "mock_dir",
    "endpoint": "endpoint",
    "model": "model",
    "provider": "provider",
    "api_key_env": "api_key_env",
    "temperature": "temperature",
    "max_output_tokens": "max_output_tokens",
    "parallel_requests": "parallel_requests",
    "parallel_sources": "parallel_sources",
    "format": "output_format",
    "rates": "rates",
    "bug_config": "bug_config",
    "dump_memory": "dump_memory",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowaudit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="audit a repository for source-to-sink bugs")
    audit.add_argument("--repo", help="repository root to audit")
    audit.add_argument("--bug-type", help="comma-separated bug types: npd, mlk, uaf (default npd)")
    audit.add_argument("--max-depth", type=int, help="max functions on one chain (default 4)")
    backend = audit.add_argument_group("backend")
    backend.add_argument("--mock-dir", help="directory of scripted responses (no network)")
    backend.add_argument("--model", help="model id for an HTTP backend")
    backend.add_argument("--endpoint", help="chat completion endpoint URL")
    backend.add_argument("--provider", choices=["openai", "anthropic"], help="request/response shape")
    backend.add_argument("--api-key-env", help="environment variable holding the API key")
    backend.add_argument("--temperature", type=float)
    backend.add_argument("--max-output-tokens", type=int)
    backend.add_argument("--parallel-requests", type=int, help="max in-flight model queries")
    backend.add_argument("--parallel-sources", type=int, help="sources explored concurrently")
    ablation = audit.add_argument_group("ablations")
    ablation.add_argument("--no-abstraction", action="store_true", default=None)
    ablation.add_argument("--no-validators", action="store_true", default=None)
    ablation.add_argument("--no-cache", action="store_true", default=None)
    out = audit.add_argument_group("output")
    out.add_argument("--format", choices=FORMATS)
    out.add_argument("--output", help="write the report here instead of stdout")
    out.add_argument("--rates", help="JSON file with input/output prices per million tokens")
    out.add_argument("--bug-config", help="JSON file overriding allocator/deallocator/null tables")
    out.add_argument("--config", help="JSON config file; its values override flags")
    out.add_argument("--dump-inventory", metavar="PATH", help="write the function inventory")
    out.add_argument("--dump-memory", metavar="PATH", help="write the analysis memory as JSON")
    return parser


def config_from_args(args: argparse.Namespace) -> AuditConfig:
    overrides = {field: getattr(args, dest) for dest, field in _FIELDS.items() if getattr(args, dest) is not None}
    for flag in ("no_abstraction", "no_validators", "no_cache"):
        if getattr(args, flag):
            overrides[flag] = True
    if args.config:
        return AuditConfig.load(args.config, **overrides)
    if "repo_root" not in overrides:
        raise ConfigInvalid("--repo is required (or give repo_root in --config)")
    return AuditConfig(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("flowaudit")
    try:
        config = config_from_args(args).validate()
        run = execute(config)
        if args.dump_inventory:
            Path(args.dump_inventory).write_text(run.inventory.dump() if run.inventory else "")
        text = emit_report(run.reports, run.ledger, config.output_format, args.output)
    except ConfigInvalid as exc:
        log.error("configuration: %s", exc)
        return EXIT_CONFIG
    except RootNotFound as exc:
        log.error("%s", exc)
        return EXIT_ROOT
    except BackendUnreachable as exc:
        log.error("%s", exc)
        return EXIT_BACKEND
    except (UnwritableOutput, OSError) as exc:
        log.error("%s", exc)
        return EXIT_OUTPUT
    except MockResponseMissing as exc:
        log.error("no scripted response for %s (fingerprint %s)", exc.key, exc.fingerprint)
        return EXIT_INTERNAL
    except FlowAuditError as exc:
        log.error("%s", exc)
        return EXIT_INTERNAL
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
