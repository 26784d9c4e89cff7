"""
Grid Page - summary table of a saved grid run
"""

import streamlit as st

from codband.database.artifacts import ArtifactStore
from codband.utils.ui_helpers import apply_custom_css, select_run, show_error, show_header


def show_grid_page():
    """Display mean final regret per grid row and policy"""
    apply_custom_css()
    show_header("Grid", "Final regret across environment variations")

    store = ArtifactStore(st.session_state.output_dir)
    name = select_run(store.list_runs(), command="grid", key="grid_run")
    if name is None:
        st.info("No grid runs found. Start one with `python -m codband grid`.")
        return

    grid = store.load_frame(name, "grid_summary.csv")
    if grid is None:
        show_error(f"{name} has no grid_summary.csv")
        return

    manifest = store.load_manifest(name)
    rows = {r["grid_row"]: r for r in manifest.get("grid_rows", [])}
    if rows:
        st.markdown("### Rows")
        st.dataframe(list(rows.values()), use_container_width=True, hide_index=True)

    st.markdown("### Mean final regret")
    table = grid.pivot(index="grid_row", columns="policy", values="mean_regret")
    st.dataframe(table.style.format("{:.1f}"), use_container_width=True)
    with st.expander("With standard errors"):
        st.dataframe(grid, use_container_width=True, hide_index=True)
