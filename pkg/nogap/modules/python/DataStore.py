import json

import h5py
import yaml


class DataStore(object):
    """
    Content-addressed cache of computed results. Each result is a JSON record stored under results/<key>, the
    key being the SHA-256 of the inputs that produced it. The intended use of this object is to open under
    "with" statement; writes happen from one process only.
    """
    # path to all the results in the HDF file.
    _result_path_ = 'results'
    # yaml encoded metadata groups
    _groups_ = ('nogap_version', 'created_by')

    def __init__(self, filename, mode='r'):
        """
        Open nothing yet, the file is opened on __enter__.
        :param filename: Path of the HDF5 file
        :param mode: 'w' for write, 'a' for read/write and 'r' for read.
        """
        self.filename = filename
        self.mode = mode
        self.file_handler = None
        self._meta = None

    def __enter__(self):
        self.file_handler = h5py.File(self.filename, self.mode)
        return self

    def __exit__(self, *args):
        if self.mode != 'r' and self._meta is not None:
            self.write_metadata(self._meta)
        self.file_handler.close()

    def write_metadata(self, data):
        """
        Replace each metadata group by its yaml dump.
        :param data: group name to metadata dict, e.g. {"nogap_version": {...}}
        """
        for group, d in data.items():
            if group in self.file_handler:
                del self.file_handler[group]
            self.file_handler[group] = yaml.dump(d)

    def load_metadata(self, groups=None):
        if groups is None:
            groups = self._groups_
        values = {}
        for group in groups:
            if group in self.file_handler:
                raw = self.file_handler[group][()]
                values[group] = yaml.safe_load(raw.decode('utf-8') if isinstance(raw, bytes) else raw)
        return values

    @property
    def meta(self):
        if self._meta is None:
            self._meta = self.load_metadata()
        return self._meta

    def update_meta(self, meta):
        self.meta.update(meta)

    def _path(self, key):
        return '{}/{}'.format(self._result_path_, key)

    def has_result(self, key):
        return self._path(key) in self.file_handler

    def read_result(self, key):
        """
        :param key: Content hash
        :return: The stored record, or None when absent
        """
        if not self.has_result(key):
            return None
        raw = self.file_handler[self._path(key)][()]
        return json.loads(raw.decode('utf-8') if isinstance(raw, bytes) else raw)

    def write_result(self, key, record):
        path = self._path(key)
        if path in self.file_handler:
            del self.file_handler[path]
        self.file_handler[path] = json.dumps(record, sort_keys=True, default=str)

    def result_keys(self):
        if self._result_path_ not in self.file_handler:
            return []
        return sorted(self.file_handler[self._result_path_].keys())
