import csv
import hashlib
import json
import os

from nogap.modules.python.Options import SweepOptions
from nogap.modules.python.TextColor import TextColor


class FileManager:
    """
    Output directories and the CSV, JSON and SVG writers of the command line front-end.
    """
    @staticmethod
    def handle_output_directory(output_dir):
        """
        Process the output directory and return a valid directory where we save the output
        :param output_dir: Output directory path
        :return: Absolute path of the directory
        """
        output_dir = os.path.abspath(output_dir)
        os.makedirs(output_dir, exist_ok=True)
        return output_dir

    @staticmethod
    def write_csv(path, header, rows):
        """
        Write rows (tuples or dicts keyed by header) to a CSV file with a fixed line terminator.
        :param path: Output file
        :param header: Column names
        :param rows: Iterable of rows
        :return: path
        """
        with open(path, 'w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                if isinstance(row, dict):
                    row = [row.get(name, '') for name in header]
                writer.writerow(row)
        TextColor.info("OUTPUT FILE: " + path)
        return path

    @staticmethod
    def write_json(path, record):
        with open(path, 'w') as fh:
            json.dump(record, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        TextColor.info("OUTPUT FILE: " + path)
        return path

    @staticmethod
    def content_hash(record):
        """
        SHA-256 of the canonical JSON form of a record, the key of cached results.
        """
        canonical = json.dumps(record, sort_keys=True, separators=(',', ':'), default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @staticmethod
    def write_svg(path, series, x_label, y_label, title=''):
        """
        A static line plot with one polyline per series.
        :param path: Output file
        :param series: dict label -> list of (x, y) pairs
        :param x_label: Abscissa label
        :param y_label: Ordinate label
        :param title: Plot title
        :return: path
        """
        width, height, margin = SweepOptions.SVG_WIDTH, SweepOptions.SVG_HEIGHT, SweepOptions.SVG_MARGIN
        points = [point for pairs in series.values() for point in pairs]
        if not points:
            raise ValueError(TextColor.RED + "ERROR: NOTHING TO PLOT.\n" + TextColor.END)
        x_min, x_max = min(x for x, _ in points), max(x for x, _ in points)
        y_min, y_max = min(y for _, y in points), max(y for _, y in points)
        x_span = (x_max - x_min) or 1.0
        y_span = (y_max - y_min) or 1.0

        def place(x, y):
            return (margin + (x - x_min) / x_span * (width - 2 * margin),
                    height - margin - (y - y_min) / y_span * (height - 2 * margin))

        colors = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b')
        lines = ['<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">'.format(width, height),
                 '<rect width="100%" height="100%" fill="white"/>',
                 '<text x="{}" y="{}" font-size="14">{}</text>'.format(margin, margin // 2, title),
                 '<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>'.format(margin, height - margin,
                                                                                   width - margin),
                 '<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>'.format(margin, margin, height - margin),
                 '<text x="{}" y="{}" font-size="12">{}</text>'.format(width // 2, height - 8, x_label),
                 '<text x="4" y="{}" font-size="12">{}</text>'.format(height // 2, y_label),
                 '<text x="{}" y="{}" font-size="10">{:.4g}</text>'.format(margin, height - margin + 14, x_min),
                 '<text x="{}" y="{}" font-size="10">{:.4g}</text>'.format(width - margin, height - margin + 14,
                                                                          x_max),
                 '<text x="4" y="{}" font-size="10">{:.4g}</text>'.format(height - margin, y_min),
                 '<text x="4" y="{}" font-size="10">{:.4g}</text>'.format(margin, y_max)]
        for index, (label, pairs) in enumerate(sorted(series.items())):
            color = colors[index % len(colors)]
            placed = " ".join("{:.2f},{:.2f}".format(*place(x, y)) for x, y in sorted(pairs))
            lines.append('<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>'.format(color, placed))
            lines.append('<text x="{}" y="{}" font-size="11" fill="{}">{}</text>'.format(
                width - margin - 120, margin + 14 * (index + 1), color, label))
        lines.append('</svg>')
        with open(path, 'w') as fh:
            fh.write("\n".join(lines) + "\n")
        TextColor.info("OUTPUT FILE: " + path)
        return path
