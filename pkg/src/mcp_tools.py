from mcp.server.fastmcp import FastMCP, Context
from typing import Optional, Dict, Any, List

from .controllers import RunConfig
from .core.synth import SynthSpec
from .utils.csv_import import IngestSchema


def setup_mcp_tools(mcp: FastMCP, controller) -> None:
    """Setup MCP tools for SuperMAN sessions."""

    @mcp.tool("load_dataset")
    def load_dataset(ctx: Context, file_path: str) -> Dict[str, Any]:
        """Load a canonical dataset JSON file."""
        try:
            summary = controller.load_dataset(file_path)
            return {"status": "success", "data": summary}
        except Exception as e:
            return {"status": "error", "message": f"Error loading dataset: {str(e)}"}

    @mcp.tool("save_dataset")
    def save_dataset(ctx: Context, file_path: str) -> Dict[str, Any]:
        """Save the current dataset as canonical JSON."""
        try:
            controller.save_dataset(file_path)
            return {"status": "success", "message": f"Saved dataset: {file_path}"}
        except Exception as e:
            return {"status": "error", "message": f"Error saving dataset: {str(e)}"}

    @mcp.tool("ingest_measurements")
    def ingest_measurements(ctx: Context, csv_path: str, labels_path: str = None,
                            vocabulary: List[str] = None, out_dir: str = None) -> Dict[str, Any]:
        """Ingest a long-format measurement CSV (entity_id, signal_type, timestamp, value, ...)."""
        try:
            schema = IngestSchema(vocabulary=vocabulary, labels_path=labels_path)
            result = controller.ingest(csv_path, schema, out_dir)
            return {"status": "success", "data": result}
        except Exception as e:
            return {"status": "error", "message": f"Error ingesting measurements: {str(e)}"}

    @mcp.tool("synthesize_dataset")
    def synthesize_dataset(ctx: Context, kind: str = "irregular_signal", n_samples: int = 1000, seed: int = 0,
                           gap_coef: float = 1.0, grouped: bool = True, out_dir: str = None) -> Dict[str, Any]:
        """Generate a synthetic dataset (feature_xor, set_xor or irregular_signal)."""
        try:
            spec = SynthSpec(kind=kind, n_samples=n_samples, seed=seed, gap_coef=gap_coef)
            result = controller.synthesize(spec, grouped, out_dir)
            return {"status": "success", "data": result}
        except Exception as e:
            return {"status": "error", "message": f"Error generating dataset: {str(e)}"}

    @mcp.tool("load_partition")
    def load_partition(ctx: Context, file_path: str) -> Dict[str, Any]:
        """Load a partition config (subsets, feature groups, delta policy)."""
        try:
            return {"status": "success", "data": controller.load_partition(file_path)}
        except Exception as e:
            return {"status": "error", "message": f"Error loading partition: {str(e)}"}

    @mcp.tool("get_dataset_info")
    def get_dataset_info(ctx: Context) -> Dict[str, Any]:
        """Get counts, feature widths and metadata of the current dataset."""
        try:
            return {"status": "success", "data": controller.get_dataset_info()}
        except Exception as e:
            return {"status": "error", "message": f"Error getting dataset info: {str(e)}"}

    @mcp.tool("get_entity")
    def get_entity(ctx: Context, entity_id: str) -> Dict[str, Any]:
        """Get the signal graphs of one entity."""
        try:
            return {"status": "success", "data": controller.get_entity(entity_id)}
        except Exception as e:
            return {"status": "error", "message": f"Error getting entity: {str(e)}"}

    @mcp.tool("set_delta_policy")
    def set_delta_policy(ctx: Context, policy: str, window: int = None) -> Dict[str, Any]:
        """Set the time-difference masking policy (full, adjacent_only, window)."""
        try:
            return {"status": "success", "data": controller.use_delta_policy(policy, window)}
        except Exception as e:
            return {"status": "error", "message": f"Error setting delta policy: {str(e)}"}

    @mcp.tool("train_model")
    def train_model(ctx: Context, config: dict = None, out_dir: str = None) -> Dict[str, Any]:
        """Train one model per seed on the current dataset; the first seed's model becomes current."""
        try:
            run = RunConfig.from_dict(dict(config or {}))
            result = controller.train_run(run, out_dir)
            return {"status": "success", "data": result}
        except Exception as e:
            return {"status": "error", "message": f"Error training model: {str(e)}"}

    @mcp.tool("load_checkpoint")
    def load_checkpoint(ctx: Context, file_path: str) -> Dict[str, Any]:
        """Load a model checkpoint."""
        try:
            return {"status": "success", "data": controller.load_model(file_path)}
        except Exception as e:
            return {"status": "error", "message": f"Error loading checkpoint: {str(e)}"}

    @mcp.tool("save_checkpoint")
    def save_checkpoint(ctx: Context, file_path: str) -> Dict[str, Any]:
        """Save the current model."""
        try:
            controller.save_model(file_path)
            return {"status": "success", "message": f"Saved checkpoint: {file_path}"}
        except Exception as e:
            return {"status": "error", "message": f"Error saving checkpoint: {str(e)}"}

    @mcp.tool("evaluate_model")
    def evaluate_model(ctx: Context, n_bins: int = 10, out_dir: str = None) -> Dict[str, Any]:
        """AUPRC, AUROC, accuracy, ECE and reliability bins on the current dataset."""
        try:
            return {"status": "success", "data": controller.evaluate(out_dir, n_bins)}
        except Exception as e:
            return {"status": "error", "message": f"Error evaluating model: {str(e)}"}

    @mcp.tool("explain_entities")
    def explain_entities(ctx: Context, entity_ids: List[str] = None, out_dir: str = None) -> Dict[str, Any]:
        """Exact node, graph and subset contributions."""
        try:
            return {"status": "success", "data": controller.explain_entities(entity_ids, out_dir)}
        except Exception as e:
            return {"status": "error", "message": f"Error explaining entities: {str(e)}"}

    @mcp.tool("perturbation_curves")
    def perturbation_curves(ctx: Context, subsets: List[str] = None, out_dir: str = None) -> Dict[str, Any]:
        """Mean output along each subset's first principal component."""
        try:
            return {"status": "success", "data": controller.perturbation_curves(subsets, out_dir=out_dir)}
        except Exception as e:
            return {"status": "error", "message": f"Error computing perturbation curves: {str(e)}"}

    @mcp.tool("noise_robustness")
    def noise_robustness(ctx: Context, kind: str, levels: List[float] = None,
                         seeds: List[int] = None, out_dir: str = None) -> Dict[str, Any]:
        """Relative AUROC/AUPRC change under additive, multiplicative or temporal noise."""
        try:
            result = controller.robustness(kind, levels, seeds or [0, 1, 2, 3, 4], out_dir)
            return {"status": "success", "data": result}
        except Exception as e:
            return {"status": "error", "message": f"Error running noise robustness: {str(e)}"}

    @mcp.tool("check_tree_metric")
    def check_tree_metric(ctx: Context, matrix_path: str) -> Dict[str, Any]:
        """Four-point condition of a distance-matrix CSV."""
        try:
            return {"status": "success", "data": controller.check_tree_metric(matrix_path)}
        except Exception as e:
            return {"status": "error", "message": f"Error checking tree metric: {str(e)}"}

    @mcp.tool("reconstruct_path")
    def reconstruct_path(ctx: Context, matrix_path: str, out_dir: str = None) -> Dict[str, Any]:
        """Recover node order and edge weights from a path-metric CSV."""
        try:
            return {"status": "success", "data": controller.reconstruct(matrix_path, out_dir)}
        except Exception as e:
            return {"status": "error", "message": f"Error reconstructing path: {str(e)}"}

    @mcp.tool("graph_distances")
    def graph_distances(ctx: Context, entity_id: str, signal_type: str) -> Dict[str, Any]:
        """Temporal distance matrix of one signal graph."""
        try:
            return {"status": "success", "data": controller.graph_distances(entity_id, signal_type)}
        except Exception as e:
            return {"status": "error", "message": f"Error computing graph distances: {str(e)}"}

    @mcp.tool("xor_benchmark")
    def xor_benchmark(ctx: Context, kind: str = "feature", grouped: Optional[bool] = None,
                      seeds: List[int] = None, out_dir: str = None) -> Dict[str, Any]:
        """Train on the XOR truth table with joint and split groupings."""
        try:
            result = controller.xor_bench(kind, grouped, seeds or list(range(10)), out_dir=out_dir)
            return {"status": "success", "data": result}
        except Exception as e:
            return {"status": "error", "message": f"Error running XOR benchmark: {str(e)}"}

    @mcp.tool("ablation_table")
    def ablation_table(ctx: Context, config: dict = None, variants: List[str] = None,
                       out_dir: str = None) -> Dict[str, Any]:
        """AUPRC per ablation variant on the current dataset and partition."""
        try:
            run = RunConfig.from_dict(dict(config or {}))
            return {"status": "success", "data": controller.ablate(run, variants, out_dir=out_dir)}
        except Exception as e:
            return {"status": "error", "message": f"Error running ablations: {str(e)}"}
