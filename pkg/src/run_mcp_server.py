"""
MCP server for SuperMAN datasets, models and analyses.

The server keeps one session (dataset, partition config, model) for its
lifetime. ``--dataset``, ``--partition`` and ``--checkpoint`` preload it so a
client can go straight to explanation or robustness tools.
"""

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

# Add the repository root so the package imports resolve when run as a script
script_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(script_dir))

from mcp.server.fastmcp import FastMCP  # noqa: E402

from src.controllers import SupermanController  # noqa: E402
from src.errors import SupermanError  # noqa: E402
from src.mcp_tools import setup_mcp_tools  # noqa: E402

logger = logging.getLogger(__name__)

SERVER_NAME = "SuperMAN Toolkit"
LOG_LEVEL_ENV = "SUPERMAN_LOG_LEVEL"
INSTRUCTIONS = (
    "Interpretable classification of entities described by irregularly sampled signals. "
    "Load or synthesize a dataset first; train_model or load_checkpoint sets the session model "
    "used by evaluate_model, explain_entities, perturbation_curves and noise_robustness."
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superman-mcp", description="Run the SuperMAN MCP server")
    parser.add_argument("--dataset", help="Dataset JSON to load at startup")
    parser.add_argument("--partition", help="Partition config to load at startup")
    parser.add_argument("--checkpoint", help="Model checkpoint to load at startup")
    parser.add_argument("--transport", choices=["stdio", "sse"], default="stdio")
    parser.add_argument("--log-level", default=os.environ.get(LOG_LEVEL_ENV, "INFO"))
    return parser


def create_server(
    controller: Optional[SupermanController] = None,
    dataset: Optional[str] = None,
    partition: Optional[str] = None,
    checkpoint: Optional[str] = None,
) -> FastMCP:
    """Build the server around ``controller`` with its session preloaded."""
    controller = controller or SupermanController()
    if dataset:
        info = controller.load_dataset(dataset)
        logger.info(f"Preloaded dataset {dataset} ({info['entities']} entities)")
    if partition:
        controller.load_partition(partition)
        logger.info(f"Preloaded partition config {partition}")
    if checkpoint:
        controller.load_model(checkpoint)
        logger.info(f"Preloaded checkpoint {checkpoint}")
    mcp = FastMCP(SERVER_NAME, instructions=INSTRUCTIONS)
    setup_mcp_tools(mcp, controller)
    return mcp


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    # stdout carries the protocol on the stdio transport
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        mcp = create_server(dataset=args.dataset, partition=args.partition, checkpoint=args.checkpoint)
    except SupermanError as e:
        logger.error(f"Could not prepare the session: {e}")
        return e.exit_code
    logger.info(f"Starting MCP server on {args.transport}...")
    try:
        mcp.run(transport=args.transport)
    except Exception as e:
        logger.error(f"Error running MCP server: {e}")
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
