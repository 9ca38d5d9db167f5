from .experiments import ExperimentConfig, run_experiment
from .serialize import (AuditReport, ResultRow, audit_files, load_assignment,
                        load_plan, save_assignment, save_plan, write_rows,
                        write_summary)
