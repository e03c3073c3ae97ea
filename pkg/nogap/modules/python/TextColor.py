import os
import sys


class TextColor:
    """
    Defines color codes for text used to give different mode of errors.
    """
    PURPLE = '\033[95m'
    CYAN = '\033[96m'
    DARKCYAN = '\033[36m'
    BLUE = '\033[94m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'
    END = '\033[0m'

    # set NOGAP_QUIET=1 to silence progress logging (worker processes, tests)
    QUIET_ENV = 'NOGAP_QUIET'

    @staticmethod
    def quiet():
        return os.environ.get(TextColor.QUIET_ENV, '0') not in ('', '0')

    @staticmethod
    def write(color, message):
        """
        Write a colored message to stderr.
        :param color: One of the color codes above
        :param message: Message, a newline is appended if missing
        :return:
        """
        if TextColor.quiet():
            return
        if not message.endswith("\n"):
            message += "\n"
        sys.stderr.write(color + message + TextColor.END)

    @staticmethod
    def info(message):
        TextColor.write(TextColor.GREEN, "INFO: " + message)

    @staticmethod
    def warn(message):
        TextColor.write(TextColor.YELLOW, "WARNING: " + message)

    @staticmethod
    def error(message):
        # errors are never silenced
        sys.stderr.write(TextColor.RED + "ERROR: " + message.rstrip("\n") + "\n" + TextColor.END)
