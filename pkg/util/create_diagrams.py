import argparse
from typing import Any, List, Optional, Sequence, Tuple

import scipy.sparse

from util.experiments_adapter import load_output_dir


def create_rank_matrix(out_dirs: Sequence[str]) -> Tuple[Any, List[int]]:
    """
    Returns a 2-dimensional numpy array with one row per output directory and one column per grade that holds the
    homology ranks computed in these directories, together with the grades of the columns.
    Directories without a homology result give a row of zeros.
    :param out_dirs: output directories of the homology stage
    :return: numpy array and the list of grades
    """
    homologies = []
    for out_dir in out_dirs:
        homology = load_output_dir(out_dir)['homology.json']
        ranks = {} if homology is None or 'homology' not in homology else homology['homology']['ranks']
        homologies.append({int(k): v for k, v in ranks.items()})

    grades = sorted({k for ranks in homologies for k in ranks})
    A = scipy.sparse.lil_matrix((len(out_dirs), len(grades)))
    for row, ranks in enumerate(homologies):
        for k, rank in ranks.items():
            A[row, grades.index(k)] = rank

    return A.toarray().astype(int), grades


def to_latex_table(matrix, row_labels: Optional[Sequence[str]] = None,
                   column_labels: Optional[Sequence[str]] = None) -> str:
    """
    Creates a string containing LaTeX code that displays a table with the matrix data.
    :param matrix: the data to display
    :param row_labels: labels of the rows; 1, 2, ... if omitted
    :param column_labels: labels of the columns; 1, 2, ... if omitted
    :return: LaTeX code to display a table
    """
    height, width = matrix.shape
    row_labels = [str(i) for i in range(1, height + 1)] if row_labels is None else [str(i) for i in row_labels]
    column_labels = [str(i) for i in range(1, width + 1)] if column_labels is None else [str(i) for i in column_labels]
    latex_code = "% generated by python script\n"
    column_specifier = "c" * (width + 1) + "}\n"
    column_specifier = column_specifier[0] + "|" + column_specifier[1:]  # insert vertical line
    latex_code += r"\begin{tabular}{" + column_specifier  # table definition
    latex_code += "  &" + "& ".join(column_labels) + r"\\" + "\n"  # table head
    latex_code += r"  \midrule" + "\n"  # midrule

    # actual table content
    for row in range(height):
        latex_code += f"  {row_labels[row]} & "
        latex_code += "& ".join(str(val) for val in matrix[row, :])
        latex_code += r"\\" + "\n"

    latex_code += r"\end{tabular}"  # end of table
    return latex_code


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Prints the homology ranks of output directories as a LaTeX table.")
    parser.add_argument("OUT_DIR", nargs="+")
    namespace = parser.parse_args()
    matrix, grades = create_rank_matrix(namespace.OUT_DIR)
    print(to_latex_table(matrix, namespace.OUT_DIR, [f"$H_{k}$" for k in grades]))
