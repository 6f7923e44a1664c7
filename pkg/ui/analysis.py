import streamlit as st
from config.settings import DEFAULT_SEEDS, DEFAULT_SWEEP_SETTINGS, RANK_ALPHA_GRID, SESSION_KEYS
from modules.analysis.analyzer import (
    create_bound_plot,
    create_rank_curve,
    create_rmse_curve,
    get_rank_statistics,
)
from modules.analysis.sweeps import alpha_rmse_sweep, rank_sweep, regime_improvements
from modules.analysis.theory import SETTING_NAMES, bound_setting, bound_table
from modules.model.training import TrainingConfig
from utils.helpers import dataframe_to_csv, get_timestamp

def show_analysis():
    """
    Display the effective-rank and sweep analysis UI
    """
    st.header("Effective Rank & Sweeps")

    tab1, tab2, tab3 = st.tabs(["Rank Sweep", "Bound Check", "Synthetic Alpha Sweep"])

    with tab1:
        show_rank_sweep()

    with tab2:
        show_bound_check()

    with tab3:
        show_alpha_sweep()

def _parse_grid(text, cast=float):
    return [cast(v) for v in text.split(",") if v.strip()]

def show_rank_sweep():
    if SESSION_KEYS["PE_MATRIX"] not in st.session_state:
        st.warning("No encodings available. Please build them in the 'Graph & Positional Encodings' tab.")
        return

    prepared = st.session_state[SESSION_KEYS["PREPARED_DATA"]]
    pe = st.session_state[SESSION_KEYS["PE_MATRIX"]]
    unit_pe = pe if pe.alpha in (0.0, 1.0) else pe.with_alpha(1.0)

    col1, col2 = st.columns(2)
    with col1:
        alphas = st.text_input("Alpha grid", ",".join(str(a) for a in RANK_ALPHA_GRID))
        seeds = st.multiselect("Seeds", DEFAULT_SEEDS, default=DEFAULT_SEEDS[:2])
    with col2:
        forward_only = st.checkbox("Forward pass only (no training)", value=True)
        max_epochs = st.slider("Max Epochs", 1, 100, 10, disabled=forward_only)

    if st.button("Run Rank Sweep"):
        try:
            with st.spinner("Measuring CLS effective rank..."):
                report = rank_sweep(prepared, unit_pe, alpha_grid=_parse_grid(alphas), seeds=seeds,
                                    config=TrainingConfig(max_epochs=max_epochs, min_epochs=min(10, max_epochs)),
                                    forward_only=forward_only)
                st.session_state[SESSION_KEYS["RANK_REPORT"]] = report
        except Exception as e:
            st.error(f"Error during rank sweep: {str(e)}")

    if SESSION_KEYS["RANK_REPORT"] in st.session_state:
        report = st.session_state[SESSION_KEYS["RANK_REPORT"]]
        stats, means = get_rank_statistics(report)

        cols = st.columns(max(1, len(means.columns)))
        for col, mode in zip(cols, means.columns):
            col.metric(f"Mean rank ({mode})", f"{stats[mode]['mean_rank']:.2f}")

        fig = create_rank_curve(report)
        if fig:
            st.pyplot(fig)
        st.dataframe(means)

        st.download_button(
            "Download Rank Sweep",
            dataframe_to_csv(report.rows),
            f"rank_sweep_{get_timestamp()}.csv",
            "text/csv",
            key='download-rank-csv'
        )

def show_bound_check():
    col1, col2 = st.columns(2)
    with col1:
        name = st.selectbox("Setting", SETTING_NAMES,
                            help="single_winner: one dominant token; two_group_distinct: distinct encodings on grouped inputs; "
                                 "two_group_shared: encodings shared within groups")
    with col2:
        alphas = st.text_input("Alpha grid", "0,1,2,3,4,5,6,7,8,9,10", key="bound-alphas")

    if st.button("Check Bound"):
        try:
            with st.spinner("Building the constructed attention weights..."):
                table = bound_table(bound_setting(name), _parse_grid(alphas),
                                    n_samples=DEFAULT_SWEEP_SETTINGS["N_SAMPLES_THEORY"])
            if table["holds"].all():
                st.success("Measured effective rank stays below the bound at every alpha.")
            else:
                st.error(f"Bound violated at {int((~table['holds']).sum())} alpha value(s).")
            st.pyplot(create_bound_plot(table))
            st.dataframe(table)
        except Exception as e:
            st.error(f"Error checking bound: {str(e)}")

def show_alpha_sweep():
    st.write("Trains one small model per (structure regime, alpha, seed) on synthetic data. This can take a while.")
    col1, col2 = st.columns(2)
    with col1:
        partitions = st.text_input("Latent groups k", ",".join(str(k) for k in DEFAULT_SWEEP_SETTINGS["REGIME_PARTITIONS"]))
        alphas = st.text_input("Alpha grid", "0,0.5,1,3,10", key="sweep-alphas")
    with col2:
        seeds = st.multiselect("Seeds", DEFAULT_SEEDS, default=DEFAULT_SEEDS[:2], key="sweep-seeds")
        n = st.number_input("Rows (n)", min_value=100, value=2000, step=100)
        max_epochs = st.slider("Max Epochs", 1, 100, 20, key="sweep-epochs")

    if st.button("Run Alpha Sweep"):
        try:
            with st.spinner("Training sweep models..."):
                report = alpha_rmse_sweep(partitions=_parse_grid(partitions, int), alpha_grid=_parse_grid(alphas),
                                          seeds=seeds, n=int(n),
                                          config=TrainingConfig(max_epochs=max_epochs, min_epochs=min(10, max_epochs)))
            st.pyplot(create_rmse_curve(report))
            st.subheader("Improvement over alpha = 0")
            st.dataframe(regime_improvements(report))

            st.download_button(
                "Download Alpha Sweep",
                dataframe_to_csv(report.rows),
                f"alpha_sweep_{get_timestamp()}.csv",
                "text/csv",
                key='download-sweep-csv'
            )
        except Exception as e:
            st.error(f"Error during alpha sweep: {str(e)}")
