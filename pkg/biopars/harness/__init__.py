"""
Evaluation harness: QA records, context ranking, batch scoring and reports
"""

from biopars.harness.records import EvalRecord, load_records
from biopars.harness.ranking import rank_mmr, rank_sim
from biopars.harness.evaluation import MetricReport, ScoreRow, format_aggregate, run_eval
from biopars.harness.report import read_report_csv, render_markdown, render_report
