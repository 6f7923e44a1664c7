import streamlit as st
import pandas as pd
from config.settings import DEFAULT_GRAPH_SETTINGS, DEFAULT_NOTEARS_SETTINGS, DEFAULT_SPECTRAL_SETTINGS, SESSION_KEYS
from modules.analysis.analyzer import create_graph_heatmap, create_pe_heatmap, create_spectrum_plot
from modules.graphs.diagnostics import diagnose
from modules.graphs.estimator import estimate_graph
from modules.graphs.graph import import_graph
from modules.spectral.encoding import make_pe
from modules.spectral.laplacian import LAPLACIAN_KINDS
from utils.helpers import dataframe_to_csv, get_timestamp

def show_graph_pe():
    """
    Display the graph estimation and positional encoding UI
    """
    st.header("Graph & Positional Encodings")

    if SESSION_KEYS["PREPARED_DATA"] not in st.session_state:
        st.info("Please prepare a table in the 'Data & Preprocessing' tab first.")
        return

    prepared = st.session_state[SESSION_KEYS["PREPARED_DATA"]]
    st.write(f"Data ready: {prepared.table.n_nodes} nodes, {len(prepared.splits['train'])} training rows")

    show_graph_estimation(prepared)

    if SESSION_KEYS["FEATURE_GRAPH"] in st.session_state:
        show_pe_construction(prepared, st.session_state[SESSION_KEYS["FEATURE_GRAPH"]])

def show_graph_estimation(prepared):
    """
    Display UI for estimating or importing the feature graph
    """
    st.subheader("Graph Estimation")

    source = st.radio("Graph source", ["Estimate from data", "Import adjacency CSV"], horizontal=True)

    if source == "Estimate from data":
        method = st.selectbox(
            "Method",
            DEFAULT_GRAPH_SETTINGS["METHODS"],
            index=DEFAULT_GRAPH_SETTINGS["METHODS"].index(DEFAULT_GRAPH_SETTINGS["METHOD"]),
            help="Association graphs are dense; Chow-Liu gives a tree; NOTEARS gives a DAG"
        )
        params = {}
        if method == "notears":
            with st.expander("NOTEARS Settings"):
                params["lambda1"] = st.slider("L1 penalty", 0.0, 0.5, DEFAULT_NOTEARS_SETTINGS["LAMBDA1"], 0.01)
                params["w_threshold"] = st.slider("Edge threshold", 0.0, 1.0, DEFAULT_NOTEARS_SETTINGS["W_THRESHOLD"], 0.05)
                params["lambda_search"] = st.checkbox("Search the L1 penalty on held-out rows")

        if st.button("Estimate Graph"):
            try:
                with st.spinner(f"Estimating {method} graph..."):
                    X_train, _ = prepared.split("train")
                    graph = estimate_graph(X_train, method, node_names=prepared.table.columns, **params)
                    store_graph(graph)
                    st.success(f"Graph estimated in {graph.params['elapsed_seconds']:.2f}s with {graph.n_edges} edges.")
            except Exception as e:
                st.error(f"Error estimating graph: {str(e)}")
    else:
        uploaded_file = st.file_uploader("Upload an n x n adjacency matrix", type=['csv'])
        directed = st.checkbox("Matrix is directed")
        if uploaded_file is not None and st.button("Import Graph"):
            try:
                graph = import_graph(uploaded_file, n_nodes=prepared.table.n_nodes, directed=directed,
                                     node_names=prepared.table.columns)
                store_graph(graph)
                st.success(f"Graph imported with {graph.n_edges} edges.")
            except Exception as e:
                st.error(f"Error importing graph: {str(e)}")

    if SESSION_KEYS["FEATURE_GRAPH"] in st.session_state:
        graph = st.session_state[SESSION_KEYS["FEATURE_GRAPH"]]
        diagnostics = st.session_state[SESSION_KEYS["GRAPH_DIAGNOSTICS"]]

        col1, col2, col3, col4 = st.columns(4)
        col1.metric("Edges", diagnostics.n_edges)
        col2.metric("Density", f"{diagnostics.density:.2f}")
        col3.metric("Graph Entropy", f"{diagnostics.entropy:.3f}")
        col4.metric("Fiedler Value", f"{diagnostics.fiedler:.3f}")
        if diagnostics.degenerate:
            st.warning("Every node is isolated; the graph carries no structure.")

        fig = create_graph_heatmap(graph)
        if fig:
            st.pyplot(fig)

def store_graph(graph):
    st.session_state[SESSION_KEYS["FEATURE_GRAPH"]] = graph
    st.session_state[SESSION_KEYS["GRAPH_DIAGNOSTICS"]] = diagnose(graph)
    st.session_state.pop(SESSION_KEYS["PE_MATRIX"], None)

def show_pe_construction(prepared, graph):
    """
    Display UI for building Laplacian eigenvector encodings
    """
    st.subheader("Positional Encodings")

    col1, col2, col3 = st.columns(3)
    with col1:
        laplacian_kind = st.selectbox("Laplacian", LAPLACIAN_KINDS)
    with col2:
        auto_k = st.checkbox("Select k automatically", value=True)
        k = "auto" if auto_k else st.number_input("k", min_value=1, max_value=50, value=2)
    with col3:
        alpha = st.number_input("Alpha", min_value=0.0, value=DEFAULT_SPECTRAL_SETTINGS["ALPHA"], step=0.5)

    if st.button("Build Encodings"):
        try:
            with st.spinner("Decomposing the Laplacian..."):
                pe, decomp, info = make_pe(graph, groups=prepared.table.groups, alpha=alpha,
                                           k=k if k == "auto" else int(k), laplacian_kind=laplacian_kind,
                                           row_names=prepared.table.feature_names)
                st.session_state[SESSION_KEYS["PE_MATRIX"]] = pe
                st.session_state[SESSION_KEYS["SPECTRUM"]] = decomp
                st.success(f"Built {pe.n_rows} x {pe.width} encodings (k = {info['k_first']}).")
                if info["clamped"]:
                    st.warning("k was clamped to the number of usable eigenvectors.")
                if pe.zeroed_columns:
                    st.warning(f"Near-constant encoding columns were zeroed: {pe.zeroed_columns}")
        except Exception as e:
            st.error(f"Error building encodings: {str(e)}")

    if SESSION_KEYS["PE_MATRIX"] in st.session_state:
        pe = st.session_state[SESSION_KEYS["PE_MATRIX"]]
        decomp = st.session_state[SESSION_KEYS["SPECTRUM"]]

        tab1, tab2 = st.tabs(["Encodings", "Spectrum"])
        with tab1:
            fig = create_pe_heatmap(pe)
            if fig:
                st.pyplot(fig)
        with tab2:
            st.pyplot(create_spectrum_plot(decomp, pe.k_first))

        df = pd.DataFrame(pe.values, index=pe.row_names).reset_index()
        st.download_button(
            "Download Encodings",
            dataframe_to_csv(df),
            f"positional_encodings_{get_timestamp()}.csv",
            "text/csv",
            key='download-pe-csv'
        )
