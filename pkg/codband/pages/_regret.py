"""
Regret Page - cumulative regret curves of a saved simulation run
"""

import streamlit as st

from codband.database.artifacts import ArtifactStore
from codband.utils.ui_helpers import apply_custom_css, select_run, show_error, show_header


def show_regret_page():
    """Display per-policy regret of one simulate run"""
    apply_custom_css()
    show_header("Regret", "Cumulative pseudo-regret per policy, averaged over replications")

    store = ArtifactStore(st.session_state.output_dir)
    name = select_run(store.list_runs(), command="simulate", key="regret_run")
    if name is None:
        st.info("No simulate runs found.")
        return

    regret = store.load_frame(name, "regret.csv")
    if regret is None:
        show_error(f"{name} has no regret.csv")
        return

    policies = sorted(regret["policy"].unique())
    chosen = st.multiselect("Policies", policies, default=policies)
    curves = (regret[regret["policy"].isin(chosen)]
              .groupby(["round", "policy"])["cumulative_regret"].mean()
              .unstack("policy"))
    st.line_chart(curves)

    summary = store.load_frame(name, "summary.csv")
    if summary is not None:
        st.markdown("### Final regret")
        st.dataframe(summary, use_container_width=True, hide_index=True)

    detections = store.load_frame(name, "detections.csv")
    if detections is not None and not detections.empty:
        st.markdown("### Detections")
        st.dataframe(detections.groupby(["policy", "seed"]).size().rename("detections").reset_index(),
                     use_container_width=True, hide_index=True)
