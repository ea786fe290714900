import json
import random

import pytest

from spellbench.cli import (EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, main,
                            parse_jsonl_line)
from spellbench.metrics import LineError
from spellbench.tests.synthetic import (clean_corpus, random_triple,
                                        with_novel_word)


LIBRARY_TRIPLE = {'original': 'I am going to the librari to studdy',
                  'predicted': 'I am going to the public library to study',
                  'expected': 'I am going to the library to study'}
LEADING_INSERTION = {'original': 'a b c', 'predicted': 'x a b c',
                     'expected': 'a b c'}


def write_jsonl(path, records):
    path.write_text(''.join(json.dumps(r) + '\n' for r in records))
    return str(path)


def evaluate(tmp_path, records, *flags):
    source = write_jsonl(tmp_path / 'triples.jsonl', records)
    report_path = tmp_path / 'report.json'
    code = main(['evaluate', source, '--report', str(report_path),
                 '--quiet', *flags])
    report = None
    if report_path.exists():
        report = json.loads(report_path.read_text())
    return code, report


def test_parse_jsonl_line():
    line = json.dumps(dict(LIBRARY_TRIPLE, lang='en'))
    triple = parse_jsonl_line(4, line, group_key='lang')
    assert triple.expected == LIBRARY_TRIPLE['expected']
    assert triple.line == 4
    assert triple.group == 'en'
    assert parse_jsonl_line(5, '{"original": "a"}') == LineError(
        5, 'missing or non-string keys: predicted, expected')
    assert parse_jsonl_line(6, '[1, 2]') == LineError(
        6, 'expected a JSON object')
    assert parse_jsonl_line(7, '   ') == LineError(7, 'empty line')
    assert parse_jsonl_line(8, '{').message.startswith('invalid JSON')


class TestEvaluate:

    def test_hallucinated_adjective(self, tmp_path, capsys):
        code, report = evaluate(tmp_path, [LIBRARY_TRIPLE])
        assert code == EXIT_OK
        assert report['detection']['f1'] == pytest.approx(0.8)
        assert report['correction']['f0.5'] == pytest.approx(0.7142857)
        assert report['n_hallucinated'] == 1
        out = capsys.readouterr().out
        assert 'detection' in out
        assert '0.8000' in out

    def test_legacy_mode(self, tmp_path):
        _, aligned = evaluate(tmp_path, [LEADING_INSERTION])
        _, legacy = evaluate(tmp_path, [LEADING_INSERTION], '--legacy')
        assert aligned['counts']['det_fp'] == 1
        assert aligned['counts']['det_tn'] == 3
        assert legacy['counts']['det_tp'] == 0
        assert legacy['counts']['det_fp'] == 4

    def test_legacy_never_finds_more_errors(self, tmp_path):
        rng = random.Random(21)
        records = []
        for k in range(10):
            triple = random_triple(rng)
            # a corrector that fixes everything, sometimes adding a word
            triple = triple._replace(predicted=triple.expected)
            if k % 3 == 0:
                triple = with_novel_word(rng, triple)
            records.append({'original': triple.original,
                            'predicted': triple.predicted,
                            'expected': triple.expected})
        _, aligned = evaluate(tmp_path, records)
        _, legacy = evaluate(tmp_path, records, '--legacy')
        assert legacy['counts']['det_tp'] <= aligned['counts']['det_tp']
        assert aligned['n_hallucinated'] == 4

    def test_skip_mismatched(self, tmp_path, capsys):
        code, report = evaluate(tmp_path,
                                [LIBRARY_TRIPLE, LEADING_INSERTION],
                                '--skip-mismatched')
        assert code == EXIT_OK
        assert report['n_skipped'] == 2
        assert 'skipped' in capsys.readouterr().out

    def test_groups(self, tmp_path, capsys):
        records = [dict(LIBRARY_TRIPLE, source='library'),
                   dict(LEADING_INSERTION, source='toy')]
        _, report = evaluate(tmp_path, records, '--group-key', 'source')
        assert set(report['groups']) == {'library', 'toy'}
        assert report['groups']['toy']['n_hallucinated'] == 1
        assert 'toy' in capsys.readouterr().out

    def test_malformed_lines_are_reported(self, tmp_path, capsys):
        path = tmp_path / 'triples.jsonl'
        path.write_bytes(json.dumps(LIBRARY_TRIPLE).encode() + b'\n' +
                         b'{"original": \n' +
                         b'{"original": "\xff", "predicted": "a", '
                         b'"expected": "a"}\n')
        report_path = tmp_path / 'report.json'
        code = main(['evaluate', str(path), '--report', str(report_path),
                     '--quiet'])
        assert code == EXIT_PARTIAL
        report = json.loads(report_path.read_text())
        assert [e['line'] for e in report['errors']] == [2, 3]
        assert 'invalid UTF-8' in report['errors'][1]['message']
        assert report['n_sentences'] == 1
        assert '2 malformed lines' in capsys.readouterr().err

    def test_empty_file(self, tmp_path, capsys):
        code, report = evaluate(tmp_path, [])
        assert code == EXIT_FATAL
        assert report is None
        assert 'no triples' in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        code = main(['evaluate', str(tmp_path / 'nope.jsonl'), '--quiet'])
        assert code == EXIT_FATAL
        assert 'No such file' in capsys.readouterr().err

    def test_bad_thread_count(self, tmp_path, capsys):
        source = write_jsonl(tmp_path / 'triples.jsonl', [LIBRARY_TRIPLE])
        code = main(['evaluate', source, '--threads', 'many', '--quiet'])
        assert code == EXIT_FATAL
        assert '--threads' in capsys.readouterr().err

    def test_bad_zwj_policy(self, tmp_path, capsys):
        source = write_jsonl(tmp_path / 'triples.jsonl', [LIBRARY_TRIPLE])
        code = main(['evaluate', source, '--zwj', 'drop', '--quiet'])
        assert code == EXIT_FATAL
        assert 'zwj_policy' in capsys.readouterr().err

    def test_parallel_files(self, tmp_path):
        paths = []
        for key in ('original', 'predicted', 'expected'):
            path = tmp_path / f'{key}.txt'
            path.write_text(LIBRARY_TRIPLE[key] + '\n' +
                            LEADING_INSERTION[key] + '\n')
            paths.append(str(path))
        report_path = tmp_path / 'report.json'
        code = main(['evaluate', '--parallel', *paths, '--report',
                     str(report_path), '--quiet'])
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report['n_sentences'] == 2
        assert report['n_hallucinated'] == 2

    def test_parallel_files_must_line_up(self, tmp_path, capsys):
        paths = []
        for key, text in (('original', 'a\nb\n'), ('predicted', 'a\nb\n'),
                          ('expected', 'a\n')):
            path = tmp_path / f'{key}.txt'
            path.write_text(text)
            paths.append(str(path))
        code = main(['evaluate', '--parallel', *paths, '--quiet'])
        assert code == EXIT_FATAL
        assert 'different line counts' in capsys.readouterr().err


class TestInjection:

    @pytest.fixture
    def corpus(self, tmp_path):
        clean = tmp_path / 'clean.txt'
        clean.write_text('\n'.join(clean_corpus(7, 300)) + '\n')
        model = tmp_path / 'model.json'
        model.write_text(json.dumps({
            'proportions': {'substitute': 0.5, 'delete': 0.5},
            'insert_pool': {c: 1 for c in 'abcdefghijklmnopqrstuvwxyz'},
            'pass_through_default': 0.9}))
        return clean, model

    def inject(self, tmp_path, clean, model, name, *flags):
        out = tmp_path / name
        code = main(['inject', str(clean), '--model', str(model), '--out',
                     str(out), '--quiet', *flags])
        assert code == EXIT_OK
        return out

    def test_full_pass_through_copies_bytes(self, tmp_path, corpus, capsys):
        clean, model = corpus
        clean.write_bytes(b'first  line\r\n\r\nlast\tline')
        out = self.inject(tmp_path, clean, model, 'noisy.txt',
                          '--pass-through', '1.0')
        assert out.read_bytes() == clean.read_bytes()
        assert 'error percentage: 0.000000' in capsys.readouterr().out

    def test_same_seed_same_output(self, tmp_path, corpus):
        clean, model = corpus
        first = self.inject(tmp_path, clean, model, 'a.txt', '--seed', '11')
        second = self.inject(tmp_path, clean, model, 'b.txt', '--seed', '11')
        third = self.inject(tmp_path, clean, model, 'c.txt', '--seed', '12')
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes() != third.read_bytes()
        assert first.read_bytes() != clean.read_bytes()

    def test_pass_through_controls_intensity(self, tmp_path, corpus, capsys):
        clean, model = corpus
        percentages = []
        for rate in ('0.5', '0.9'):
            noisy = self.inject(tmp_path, clean, model, f'noisy-{rate}.txt',
                                '--pass-through', rate)
            capsys.readouterr()
            assert main(['measure', str(noisy), str(clean)]) == EXIT_OK
            out = capsys.readouterr().out
            percentages.append(float(out.split(':')[1]))
        assert percentages[0] > percentages[1] > 0

    def test_invalid_utf8(self, tmp_path, corpus, capsys):
        clean, model = corpus
        clean.write_bytes(b'ok\nbad \xc3\x28\n')
        noisy = tmp_path / 'noisy.txt'
        code = main(['inject', str(clean), '--model', str(model), '--out',
                     str(noisy), '--quiet'])
        assert code == EXIT_FATAL
        assert 'invalid UTF-8 at byte offset 7' in capsys.readouterr().err
        assert not noisy.exists()

    def test_estimate_then_inject(self, tmp_path, corpus, capsys):
        clean, model = corpus
        noisy = self.inject(tmp_path, clean, model, 'noisy.txt',
                            '--pass-through', '0.0')
        estimated = tmp_path / 'estimated.json'
        code = main(['estimate', str(noisy), str(clean), '--out',
                     str(estimated), '--quiet'])
        assert code == EXIT_OK
        assert 'pass-through rate: 0.0000' in capsys.readouterr().out
        data = json.loads(estimated.read_text())
        assert data['proportions']['substitute'] == pytest.approx(0.5,
                                                                  abs=0.1)
        assert data['proportions']['delete'] == pytest.approx(0.5, abs=0.1)

    def test_estimate_without_errors(self, tmp_path, corpus, capsys):
        clean, _ = corpus
        code = main(['estimate', str(clean), str(clean), '--out',
                     str(tmp_path / 'model.json')])
        assert code == EXIT_FATAL
        assert 'no error signal' in capsys.readouterr().err


def test_measure(tmp_path, capsys):
    noisy = tmp_path / 'noisy.txt'
    clean = tmp_path / 'clean.txt'
    noisy.write_text('abcd eXgh\n')
    clean.write_text('abcd efgh\n')
    assert main(['measure', str(noisy), str(clean)]) == EXIT_OK
    assert 'error percentage: 0.125000' in capsys.readouterr().out


def test_measure_unequal_corpora(tmp_path, capsys):
    noisy = tmp_path / 'noisy.txt'
    clean = tmp_path / 'clean.txt'
    noisy.write_text('a\nb\n')
    clean.write_text('a\n')
    assert main(['measure', str(noisy), str(clean)]) == EXIT_FATAL
    assert 'different numbers of sentences' in capsys.readouterr().err
