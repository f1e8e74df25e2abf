import os
import sys
sys.path.insert(0, '..')

import pandas as pd

from nusrec.experiments import emit_plot
from nusrec.io import load_results


ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..')
OUT_FOLDER = os.path.join(ROOT, 'sim-results')
OUT_DIR = os.path.join(ROOT, 'figures')

os.makedirs(OUT_DIR, exist_ok=True)


if __name__ == '__main__':

    for filename in sorted(os.listdir(OUT_FOLDER)):
        if not filename.endswith('.csv') or filename.endswith('-flags.csv'):
            continue
        filepath = os.path.join(OUT_FOLDER, filename)
        if filename.endswith('-waveforms.csv'):
            table = pd.read_csv(filepath)
        else:
            table = load_results(filepath)
        out_filepath = os.path.join(OUT_DIR, filename.replace('.csv', '.svg'))
        emit_plot(table, out_filepath)
        print(f'Figure stored at {out_filepath}.')
