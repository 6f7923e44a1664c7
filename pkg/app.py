import streamlit as st
from ui.data_upload import show_data_upload
from ui.graph_pe import show_graph_pe
from ui.training import show_training
from ui.analysis import show_analysis

# Page configuration
st.set_page_config(
    page_title="Tabular Graph PE",
    page_icon="🧭",
    layout="wide",
    initial_sidebar_state="expanded"
)

# App title
st.title("Graph Positional Encodings for Tabular Transformers")
st.write("Estimate a feature graph, turn its Laplacian eigenvectors into positional encodings, "
         "and measure their effect on accuracy and on the effective rank of transformer embeddings.")

# Tabs for the pipeline stages
tab1, tab2, tab3, tab4 = st.tabs([
    "1. Data & Preprocessing",
    "2. Graph & Positional Encodings",
    "3. Training",
    "4. Effective Rank & Sweeps",
])

with tab1:
    show_data_upload()

with tab2:
    show_graph_pe()

with tab3:
    show_training()

with tab4:
    show_analysis()
