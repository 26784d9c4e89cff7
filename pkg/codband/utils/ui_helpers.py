"""
Streamlit UI Styling for the results browser
"""

import streamlit as st


def apply_custom_css():
    """Run cards, badges and error boxes used by every page"""
    st.markdown("""
        <style>
        .block-container { padding-top: 1.5rem; }

        /* Run card */
        .run-card {
            border: 1px solid #d0d7de;
            border-left: 5px solid #6f42c1;
            border-radius: 6px;
            padding: 0.75rem 1.25rem;
            margin-bottom: 0.75rem;
        }

        .run-badge {
            font-family: monospace;
            font-size: 0.8rem;
            background: #f3e8ff;
            color: #5a32a3;
            border-radius: 4px;
            padding: 0.1rem 0.5rem;
            margin-right: 0.4rem;
        }

        .timestamp { color: #6e7781; font-size: 0.8rem; }

        .error-box {
            border-left: 5px solid #cf222e;
            background: #ffebe9;
            color: #82071e;
            border-radius: 6px;
            padding: 0.75rem 1.25rem;
            margin: 0.75rem 0;
        }

        footer { visibility: hidden; }
        </style>
    """, unsafe_allow_html=True)


def show_header(title: str, subtitle: str = None):
    st.markdown(f"# {title}")
    if subtitle:
        st.markdown(f"*{subtitle}*")
    st.markdown("---")


def show_error(message: str):
    st.markdown(f'<div class="error-box">{message}</div>', unsafe_allow_html=True)


def show_run_card(run: dict):
    """Card summarizing one run manifest"""
    config = run.get("config", {})
    env = config.get("env", {})
    st.markdown(
        f'<div class="run-card"><span class="run-badge">{run.get("command", "?")}</span> '
        f'<b>{run["run"]}</b> &middot; setting {env.get("setting", "?")}, '
        f'N={env.get("n_users", "?")}, T={env.get("horizon", "?")}, '
        f'{config.get("replications", "?")} replications '
        f'<div class="timestamp">{run.get("created_at", "")}</div></div>',
        unsafe_allow_html=True,
    )


def select_run(runs: list, command: str = None, key: str = "run"):
    """Selectbox over runs, optionally restricted to one command; returns the run name"""
    names = [r["run"] for r in runs if command is None or r.get("command") == command]
    if not names:
        return None
    return st.selectbox("Run", names, key=key)
