import streamlit as st
import pandas as pd
from config.settings import DEFAULT_SYNTHETIC_SETTINGS, SESSION_KEYS
from modules.preprocess.cleaner import preprocess_table
from modules.preprocess.table import read_raw_csv
from modules.synthetic.generator import SyntheticSpec, generate, structure_regime, to_prepared
from utils.helpers import dataframe_to_csv, get_timestamp

def show_data_upload():
    """
    Display the data upload and preprocessing UI
    """
    st.header("Data & Preprocessing")

    upload_option = st.radio(
        "Choose input data",
        ["Upload CSV Table", "Generate Synthetic Data"]
    )

    if upload_option == "Upload CSV Table":
        show_table_upload()
    else:
        show_synthetic_generation()

    if SESSION_KEYS["PREPARED_DATA"] in st.session_state:
        show_prepared_summary(st.session_state[SESSION_KEYS["PREPARED_DATA"]])

def show_table_upload():
    """
    Display UI for uploading and preprocessing a raw CSV table
    """
    uploaded_file = st.file_uploader("Upload a CSV file with a header row", type=['csv'])

    if uploaded_file is not None:
        try:
            raw = read_raw_csv(uploaded_file)
            st.session_state[SESSION_KEYS["RAW_TABLE"]] = raw
            st.write(f"Data loaded successfully: {raw.n_rows} rows, {len(raw.columns)} columns")

            st.subheader("Data Preview")
            st.dataframe(raw.frame.head())

            col1, col2 = st.columns(2)
            with col1:
                target = st.selectbox("Target column", raw.columns, index=len(raw.columns) - 1)
            with col2:
                task = st.selectbox("Task", ["regression", "classification"])

            st.caption("Inferred column kinds: " + ", ".join(f"{c} ({k})" for c, k in raw.kinds.items()))

            if st.button("Process & Split Data"):
                with st.spinner("Cleaning, encoding and splitting data..."):
                    prepared = preprocess_table(raw, target=target, task=task)
                    st.session_state[SESSION_KEYS["PREPARED_DATA"]] = prepared
                    st.success(f"Data processed successfully! {prepared.table.n_nodes} nodes from "
                               f"{prepared.table.n_features} features.")

                    st.subheader("Data Cleaning Statistics")
                    col1, col2, col3, col4 = st.columns(4)
                    col1.metric("Initial Rows", prepared.stats['initial_count'])
                    col2.metric("Rows Removed", prepared.stats['rows_removed'])
                    col3.metric("Dropped Columns", len(prepared.stats['dropped_columns']))
                    col4.metric("Constant Columns", len(prepared.stats['constant_columns']))
                    if prepared.stats['dropped_columns']:
                        st.warning(f"Dropped columns: {', '.join(map(str, prepared.stats['dropped_columns']))}")
        except Exception as e:
            st.error(f"Error processing file: {str(e)}")

def show_synthetic_generation():
    """
    Display UI for generating a structure-controlled synthetic dataset
    """
    col1, col2, col3, col4 = st.columns(4)
    d = col1.number_input("Features (d)", min_value=2, max_value=200, value=DEFAULT_SYNTHETIC_SETTINGS["D"])
    k = col2.number_input("Latent groups (k)", min_value=1, max_value=200, value=DEFAULT_SYNTHETIC_SETTINGS["K"])
    n = col3.number_input("Rows (n)", min_value=10, max_value=100000, value=DEFAULT_SYNTHETIC_SETTINGS["N"])
    seed = col4.number_input("Seed", min_value=0, value=1)

    if st.button("Generate Data"):
        try:
            with st.spinner("Generating synthetic data..."):
                dataset = generate(SyntheticSpec(d=int(d), k=int(k), n=int(n), seed=int(seed)))
                prepared = to_prepared(dataset, seed=int(seed))
                st.session_state[SESSION_KEYS["PREPARED_DATA"]] = prepared
                st.success(f"Generated {int(n)} rows with {int(k)} groups "
                           f"({structure_regime(int(d), int(k))} structure).")
                st.write("Group sizes: " + ", ".join(str(len(g)) for g in dataset.groups))
        except Exception as e:
            st.error(f"Error generating data: {str(e)}")

def show_prepared_summary(prepared):
    """
    Display the current prepared table and its splits
    """
    st.subheader("Prepared Table")
    col1, col2, col3 = st.columns(3)
    col1.metric("Train Rows", len(prepared.splits["train"]))
    col2.metric("Validation Rows", len(prepared.splits["val"]))
    col3.metric("Test Rows", len(prepared.splits["test"]))

    df = pd.DataFrame(prepared.table.data, columns=prepared.table.columns)
    if prepared.target is not None:
        df["target"] = prepared.target
    st.dataframe(df.head())

    st.download_button(
        "Download Processed Table",
        dataframe_to_csv(df),
        f"processed_table_{get_timestamp()}.csv",
        "text/csv",
        key='download-processed-csv'
    )
