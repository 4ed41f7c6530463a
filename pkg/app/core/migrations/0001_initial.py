from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(
                    auto_created=True, primary_key=True, serialize=False,
                    verbose_name='ID')),
                ('output_dir', models.CharField(max_length=1024)),
                ('arch', models.CharField(max_length=16)),
                ('adversarial', models.BooleanField(default=False)),
                ('seed', models.IntegerField()),
                ('config', models.JSONField(default=dict)),
                ('corpora', models.JSONField(default=dict)),
                ('metrics', models.JSONField(blank=True, default=dict)),
                ('code_version', models.CharField(max_length=32)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
    ]
