"""Multimodal Wikipedia article quality assessment toolkit.

Submodules:
    dump_ingest  streaming dump parsing, pairing, labels, balancing, splits
    preprocess   wikitext to plain tokens, budgets, sentence splitting
    encoders     section/talk/image modality encoders
    summarizer   bidirectional GRU + self-attention page vector
    fusion       fusion modes and the classification head
    training     loss, Adam, staged training regime
    evaluation   metrics, Stuart-Maxwell test, quartiles, attribution
    autodiff     reverse-mode differentiation over a closed op set
    store        embedding store / checkpoint binary containers
    synthetic    bundled class-correlated synthetic corpus
    pipeline     record formats and model-input assembly
    cli          command-line pipeline driver
"""

__version__ = "0.1.0"
