"""
Runs Page - list saved runs and their manifests
"""

import streamlit as st

from codband.database.artifacts import ArtifactStore
from codband.utils.ui_helpers import apply_custom_css, show_header, show_run_card


def show_runs_page():
    """Display every complete run under the output directory"""
    apply_custom_css()
    show_header("Runs", "Saved experiment runs and their manifests")

    store = ArtifactStore(st.session_state.output_dir)
    runs = store.list_runs()
    if not runs:
        st.info(f"No runs found under {store.root}. Start one with `python -m codband simulate`.")
        return

    col1, col2 = st.columns(2)
    with col1:
        st.metric("Runs", len(runs))
    with col2:
        st.metric("Cells", sum(len(r.get("cells", [])) for r in runs))

    st.markdown("---")
    for run in runs:
        show_run_card(run)
        with st.expander("Manifest"):
            st.json(run)
