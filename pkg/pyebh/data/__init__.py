from pyebh.data.dataio import Dataset, analyze_dataset, compare_panel, load_dataset, load_panel, preprocess  # noqa
