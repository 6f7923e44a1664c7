import streamlit as st
import numpy as np
import pandas as pd
from config.settings import ALPHA_GRID, DEFAULT_MODEL_SETTINGS, DEFAULT_TRAINING_SETTINGS, SESSION_KEYS
from modules.analysis.analyzer import improvement_percentage
from modules.model.training import (
    TrainingConfig,
    TrainingDivergedError,
    alpha_select,
    build_model,
    evaluate,
    table_groups,
    train,
)
from modules.spectral.encoding import random_pe
from utils.helpers import dataframe_to_csv, get_timestamp

def show_training():
    """
    Display the model training UI
    """
    st.header("Training")

    if SESSION_KEYS["PREPARED_DATA"] not in st.session_state:
        st.info("Please prepare a table in the 'Data & Preprocessing' tab first.")
        return

    prepared = st.session_state[SESSION_KEYS["PREPARED_DATA"]]
    pe = st.session_state.get(SESSION_KEYS["PE_MATRIX"])

    st.subheader("Training Settings")
    col1, col2 = st.columns(2)
    with col1:
        modes = ["none", "fixed", "random", "learnable"] if pe is not None else ["none"]
        pe_mode = st.selectbox("PE mode", modes, index=1 if pe is not None else 0,
                               help="Build graph encodings in tab 2 to enable the PE modes")
        select_alpha = st.checkbox("Select alpha on the validation split", value=False)
        alpha = 1.0
        if not select_alpha:
            alpha = st.number_input("Alpha", min_value=0.0, value=1.0, step=0.5)
        seed = st.number_input("Seed", min_value=0, value=1)
    with col2:
        max_epochs = st.slider("Max Epochs", 1, 200, DEFAULT_TRAINING_SETTINGS["MAX_EPOCHS"])
        patience = st.slider("Patience", 1, 50, DEFAULT_TRAINING_SETTINGS["PATIENCE"])
        batch_size = st.select_slider("Batch Size", [16, 32, 64, 128, 256], DEFAULT_TRAINING_SETTINGS["BATCH_SIZE"])
        learning_rate = st.select_slider("Learning Rate", [1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3],
                                         DEFAULT_TRAINING_SETTINGS["LEARNING_RATE"])

    with st.expander("Model Settings"):
        col1, col2, col3 = st.columns(3)
        token_dim = col1.selectbox("Token Dimension", [32, 64, 128, 192],
                                   index=[32, 64, 128, 192].index(DEFAULT_MODEL_SETTINGS["TOTAL_TOKEN_DIM"]))
        n_layers = col2.slider("Layers", 1, 6, DEFAULT_MODEL_SETTINGS["N_LAYERS"])
        n_heads = col3.selectbox("Heads", [1, 2, 4, 8], index=[1, 2, 4, 8].index(DEFAULT_MODEL_SETTINGS["N_HEADS"]))

    config = TrainingConfig(learning_rate=learning_rate, batch_size=batch_size, max_epochs=max_epochs,
                            patience=patience, min_epochs=min(DEFAULT_TRAINING_SETTINGS["MIN_EPOCHS"], max_epochs))
    overrides = {"total_token_dim": token_dim, "n_layers": n_layers, "n_heads": n_heads,
                 "groups": table_groups(prepared.table)}

    if st.button("Train Model & Baseline"):
        try:
            run_training(prepared, pe, pe_mode, alpha, select_alpha, int(seed), config, overrides)
        except TrainingDivergedError as e:
            st.error(f"Training diverged: {str(e)}. Try a smaller learning rate.")
        except Exception as e:
            st.error(f"Error during training: {str(e)}")

    if SESSION_KEYS["TRAINING_RESULTS"] in st.session_state:
        show_training_results(st.session_state[SESSION_KEYS["TRAINING_RESULTS"]], prepared.task)

def run_training(prepared, pe, pe_mode, alpha, select_alpha, seed, config, overrides):
    n_features = prepared.table.n_features
    n_classes = int(np.max(prepared.target)) + 1 if prepared.task == "classification" else 1
    unit_pe = None
    width = 0
    if pe is not None:
        unit_pe = pe if pe.alpha in (0.0, 1.0) else pe.with_alpha(1.0)
        width = unit_pe.width
    source = random_pe((n_features, width), 1.0, seed) if pe_mode == "random" else unit_pe

    def make_model(mode, a):
        return build_model(n_features, pe_mode=mode, pe=source, pe_dim=width, alpha=a,
                           task=prepared.task, n_classes=n_classes, seed=seed, **overrides)

    X_test, y_test = prepared.split("test")
    rows, histories = [], {}
    with st.spinner("Training the no-PE baseline..."):
        baseline = train(make_model("none", 0.0), prepared, config)
        histories["none"] = baseline.history_frame()
        for metric, value in evaluate(baseline.model, X_test, y_test).items():
            rows.append({"mode": "none", "alpha": 0.0, "metric": metric, "value": value})

    if pe_mode != "none":
        with st.spinner(f"Training the {pe_mode} PE model..."):
            if select_alpha:
                alpha, results = alpha_select(lambda a: make_model(pe_mode, a), prepared, ALPHA_GRID, config)
                result = results[alpha]
                st.info(f"Selected alpha = {alpha:g} on the validation split")
            else:
                result = train(make_model(pe_mode, alpha), prepared, config)
            histories[pe_mode] = result.history_frame()
            for metric, value in evaluate(result.model, X_test, y_test).items():
                rows.append({"mode": pe_mode, "alpha": alpha, "metric": metric, "value": value})

    st.session_state[SESSION_KEYS["TRAINING_RESULTS"]] = {
        "metrics": pd.DataFrame(rows),
        "histories": histories,
    }
    st.success("Training finished.")

def show_training_results(results, task):
    """
    Display test metrics, improvement over the baseline and learning curves
    """
    metrics = results["metrics"]
    st.subheader("Test Metrics")
    st.dataframe(metrics.pivot_table(index="mode", columns="metric", values="value"))

    primary = "rmse" if task == "regression" else "balanced_accuracy"
    values = metrics[metrics["metric"] == primary].set_index("mode")["value"]
    if "none" in values.index and len(values) > 1 and values["none"] != 0:
        mode = [m for m in values.index if m != "none"][0]
        change = improvement_percentage(values["none"], values[mode], higher_is_better=primary != "rmse")
        st.metric(f"Improvement over baseline ({primary})", f"{change:.2f}%")

    st.subheader("Learning Curves")
    curves = pd.concat(
        [frame.set_index("epoch").drop(columns="train_loss").add_prefix(f"{mode} ")
         for mode, frame in results["histories"].items() if len(frame)],
        axis=1,
    )
    st.line_chart(curves)

    st.download_button(
        "Download Metrics",
        dataframe_to_csv(metrics),
        f"training_metrics_{get_timestamp()}.csv",
        "text/csv",
        key='download-metrics-csv'
    )
