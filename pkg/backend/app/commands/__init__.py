from app.commands.convergence import convergence_command
from app.commands.identities import identities_command
from app.commands.inequalities import inequalities_command
from app.commands.rates import rates_command
from app.commands.report import report_command
from app.commands.solve import solve_command

COMMANDS = (
    identities_command,
    inequalities_command,
    solve_command,
    rates_command,
    convergence_command,
    report_command,
)
