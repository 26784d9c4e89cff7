"""
Main Application Entry Point
CoDBand results browser - Streamlit App
"""

import os
import sys
from pathlib import Path

import streamlit as st
from dotenv import load_dotenv

# streamlit runs this file as a script; make the package importable
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

# Load environment variables
load_dotenv()

# Pages are prefixed with _ to prevent Streamlit auto-discovery
from codband.pages._grid import show_grid_page
from codband.pages._regret import show_regret_page
from codband.pages._runs import show_runs_page
from codband.utils.ui_helpers import apply_custom_css

st.set_page_config(
    page_title="CoDBand Results",
    page_icon="📈",
    layout="wide",
    initial_sidebar_state="expanded"
)

PAGES = {
    "runs": ("Runs", show_runs_page),
    "regret": ("Regret", show_regret_page),
    "grid": ("Grid", show_grid_page),
}


def initialize_session_state():
    """Initialize session state variables"""
    if 'page' not in st.session_state:
        st.session_state.page = 'runs'
    if 'output_dir' not in st.session_state:
        st.session_state.output_dir = os.getenv("CODBAND_OUTPUT_DIR", "results")


def show_navigation():
    """Display navigation sidebar"""
    with st.sidebar:
        st.markdown("# 📈 CoDBand Results")
        st.markdown("---")

        for key, (label, _) in PAGES.items():
            if st.button(label, use_container_width=True,
                         type="primary" if st.session_state.page == key else "secondary"):
                st.session_state.page = key
                st.rerun()

        st.markdown("---")
        st.session_state.output_dir = st.text_input("Output directory", st.session_state.output_dir)
        st.caption("Shows files written by `python -m codband`; refresh after a run finishes.")


def main():
    """Main application logic"""
    initialize_session_state()
    apply_custom_css()
    show_navigation()
    _, page = PAGES.get(st.session_state.page, PAGES["runs"])
    page()


if __name__ == "__main__":
    main()
